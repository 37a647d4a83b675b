use super::{ActionId, DeterministicPolicy, Objective, StateId, System};

/// Result of [`value_iterate_sum`].
#[derive(Debug, Clone)]
pub struct SumSolve {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Classical SSP value iteration for one sum-aggregated cost:
/// `J(s) = min_a Σ P(s'|s,a) (c(s,a,s') + J(s'))`, `J = 0` on targets.
pub fn value_iterate_sum(sys: &System, cost: &Objective, tol: f64, max_iter: usize) -> SumSolve {
    let table = cost.tabulate(sys);
    let mut values = vec![0.0; sys.num_states()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = sys
            .states()
            .map(|s| {
                if sys.is_target(s) {
                    return 0.0;
                }
                sys.choices(s)
                    .iter()
                    .enumerate()
                    .map(|(ci, c)| {
                        c.successors
                            .iter()
                            .zip(table.choice(s, ci))
                            .map(|(succ, cost)| succ.prob * (cost + values[succ.state.0]))
                            .sum::<f64>()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        for (old, new) in values.iter().zip(&next) {
            delta = delta.max((old - new).abs());
        }
        values = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    SumSolve {
        values,
        iterations,
        converged,
    }
}

/// Greedy policy for a sum value table, lowest action index on ties.
pub fn greedy_sum_policy(sys: &System, cost: &Objective, values: &[f64]) -> DeterministicPolicy<StateId> {
    let table = cost.tabulate(sys);
    sys.states()
        .filter(|s| !sys.is_target(*s))
        .filter_map(|s| {
            let mut best: Option<(ActionId, f64)> = None;
            for (ci, c) in sys.choices(s).iter().enumerate() {
                let q: f64 = c
                    .successors
                    .iter()
                    .zip(table.choice(s, ci))
                    .map(|(succ, cost)| succ.prob * (cost + values[succ.state.0]))
                    .sum();
                if best.is_none_or(|(_, b)| q < b) {
                    best = Some((c.action, q));
                }
            }
            best.map(|(a, _)| (s, a))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{Aggregation, SystemBuilder};

    #[test]
    fn geometric_retry() {
        // Succeeds w.p. 0.5 per try at cost 1: expected 2 tries.
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 0.5).transition(0, 0, 0, 0.5);
        b.transition(1, 0, 1, 1.0).target(1);
        let sys = b.build();
        let res = value_iterate_sum(&sys, &Objective::uniform(Aggregation::Sum, 1.0), 1e-12, 10_000);
        assert!(res.converged);
        assert!((res.values[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn picks_cheaper_route() {
        let mut b = SystemBuilder::with_counts(3, 2);
        b.transition(0, 0, 2, 1.0).transition(0, 1, 1, 1.0);
        b.transition(1, 0, 2, 1.0).transition(2, 0, 2, 1.0).target(2);
        let sys = b.build();
        let cost = Objective::uniform(Aggregation::Sum, 1.0).with_cost(0, 0, 2, 5.0);
        let res = value_iterate_sum(&sys, &cost, 1e-12, 100);
        assert_eq!(res.values[0], 2.0);
        let pi = greedy_sum_policy(&sys, &cost, &res.values);
        assert_eq!(pi.get(&StateId(0)), Some(ActionId(1)));
    }
}
