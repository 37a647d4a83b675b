use serde::{Deserialize, Serialize};

use super::{Aggregation, ActionId, CostSpec, Policy, StateId, System};
use crate::{Error, Result};

/// A finite run `s_0 a_0 s_1 ... s_τ`.
///
/// `hitting_time` is `Some(τ)` when the run ended in the target set (and
/// not before); `None` when it was cut off first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub hitting_time: Option<usize>,
}

impl Trajectory {
    pub fn start(s0: StateId) -> Self {
        Trajectory {
            states: vec![s0],
            actions: Vec::new(),
            hitting_time: None,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last_state(&self) -> StateId {
        *self.states.last().expect("trajectory has at least one state")
    }

    /// `(s_t, a_t, s_{t+1})` triples.
    pub fn steps(&self) -> impl Iterator<Item = (StateId, ActionId, StateId)> + '_ {
        self.actions
            .iter()
            .enumerate()
            .map(move |(t, a)| (self.states[t], *a, self.states[t + 1]))
    }

    /// Checks the length relation and, when a hitting time is present,
    /// that it is the first visit to the target set.
    pub fn is_consistent(&self, sys: &System) -> bool {
        if self.states.len() != self.actions.len() + 1 {
            return false;
        }
        match self.hitting_time {
            None => true,
            Some(tau) => {
                tau == self.actions.len()
                    && sys.is_target(self.states[tau])
                    && self.states[..tau].iter().all(|s| !sys.is_target(*s))
            }
        }
    }
}

/// Which transitions a max objective ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxRange {
    /// `t = 0 .. τ-1`, every transition of the run.
    #[default]
    AllTransitions,
    /// `t = 0 .. τ-2`, the literal index bound `0 ≤ t < τ-1`, which leaves
    /// out the transition into the target.
    ExcludeFinal,
}

/// `P_π(ξ) = Π π(a_t | s_t) P(s_{t+1} | s_t, a_t)`.
pub fn trajectory_probability<P: Policy<StateId>>(
    traj: &Trajectory,
    policy: &P,
    sys: &System,
) -> Result<f64> {
    check_ids(traj, sys)?;
    let mut prob = 1.0;
    for (s, a, next) in traj.steps() {
        prob *= policy.probability(&s, a) * sys.prob(s, a, next);
        if prob == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(prob)
}

fn check_ids(traj: &Trajectory, sys: &System) -> Result<()> {
    if let Some(s) = traj.states.iter().find(|s| s.0 >= sys.num_states()) {
        return Err(Error::UnknownState(s.0));
    }
    if let Some(a) = traj.actions.iter().find(|a| a.0 >= sys.num_actions()) {
        return Err(Error::UnknownAction(a.0));
    }
    Ok(())
}

/// Per-objective realized cost of a completed trajectory.
///
/// Sum objectives add the step costs, max objectives take the largest one.
/// A zero-step trajectory costs zero under both.
pub fn evaluate_trajectory_costs(
    traj: &Trajectory,
    spec: &CostSpec,
    range: MaxRange,
) -> Result<Vec<f64>> {
    let tau = traj.hitting_time.ok_or(Error::MissingHittingTime)?;
    Ok(realized_costs(&traj.states[..=tau], &traj.actions[..tau], spec, range))
}

/// Costs of a prefix regardless of whether it reached the target.
pub fn realized_costs(
    states: &[StateId],
    actions: &[ActionId],
    spec: &CostSpec,
    range: MaxRange,
) -> Vec<f64> {
    let steps = actions.len();
    let max_steps = match range {
        MaxRange::AllTransitions => steps,
        MaxRange::ExcludeFinal => steps.saturating_sub(1),
    };
    spec.objectives
        .iter()
        .map(|obj| {
            let step_cost = |t: usize| obj.cost(states[t], actions[t], states[t + 1]);
            match obj.aggregation {
                Aggregation::Sum => (0..steps).map(step_cost).sum(),
                Aggregation::Max => (0..max_steps).map(step_cost).fold(0.0, f64::max),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{Objective, StochasticPolicy, SystemBuilder};

    fn line(n: usize, p: f64) -> System {
        // s_i --a0--> s_{i+1} w.p. p, stays w.p. 1-p.
        let mut b = SystemBuilder::with_counts(n, 2);
        for i in 0..n - 1 {
            b.transition(i, 0, i + 1, p);
            if p < 1.0 {
                b.transition(i, 0, i, 1.0 - p);
            }
            b.transition(i, 1, i, 1.0);
        }
        b.transition(n - 1, 0, n - 1, 1.0).target(n - 1);
        b.build()
    }

    fn traj(states: &[usize], actions: &[usize], tau: Option<usize>) -> Trajectory {
        Trajectory {
            states: states.iter().copied().map(StateId).collect(),
            actions: actions.iter().copied().map(ActionId).collect(),
            hitting_time: tau,
        }
    }

    fn always_a0(n: usize) -> StochasticPolicy<StateId> {
        (0..n).fold(StochasticPolicy::new(), |p, s| {
            p.deterministic(StateId(s), ActionId(0))
        })
    }

    #[test]
    fn deterministic_product_of_ones() {
        let sys = line(5, 1.0);
        let t = traj(&[0, 1, 2, 3, 4], &[0, 0, 0, 0], Some(4));
        assert_eq!(trajectory_probability(&t, &always_a0(5), &sys).unwrap(), 1.0);
    }

    #[test]
    fn two_steps_at_point_seven() {
        let sys = line(3, 0.7);
        let t = traj(&[0, 1, 2], &[0, 0], Some(2));
        let p = trajectory_probability(&t, &always_a0(3), &sys).unwrap();
        assert!((p - 0.49).abs() < 1e-15);
    }

    #[test]
    fn zero_policy_mass_gives_zero() {
        let sys = line(3, 0.7);
        let t = traj(&[0, 0, 1], &[1, 0], None);
        assert_eq!(trajectory_probability(&t, &always_a0(3), &sys).unwrap(), 0.0);
    }

    #[test]
    fn unknown_ids_rejected() {
        let sys = line(3, 1.0);
        let t = traj(&[0, 7], &[0], None);
        assert!(matches!(
            trajectory_probability(&t, &always_a0(3), &sys),
            Err(Error::UnknownState(7))
        ));
        let t = traj(&[0, 1], &[9], None);
        assert!(matches!(
            trajectory_probability(&t, &always_a0(3), &sys),
            Err(Error::UnknownAction(9))
        ));
    }

    #[test]
    fn sum_of_uniform_costs() {
        let spec = CostSpec::new(vec![Objective::uniform(Aggregation::Sum, 1.0)]);
        let t = traj(&[0, 1, 2, 3], &[0, 0, 0], Some(3));
        assert_eq!(
            evaluate_trajectory_costs(&t, &spec, MaxRange::default()).unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn bottleneck_of_gateway_route() {
        // Entering costs 20, 30, 20 as on the route through the cheaper gateway.
        let obj = Objective::uniform(Aggregation::Max, 20.0).with_cost(1, 0, 2, 30.0);
        let spec = CostSpec::new(vec![obj]);
        let t = traj(&[0, 1, 2, 3], &[0, 0, 0], Some(3));
        assert_eq!(
            evaluate_trajectory_costs(&t, &spec, MaxRange::AllTransitions).unwrap(),
            vec![30.0]
        );
        // The literal bound drops the last transition only.
        let obj = Objective::uniform(Aggregation::Max, 20.0).with_cost(2, 0, 3, 30.0);
        let spec = CostSpec::new(vec![obj]);
        assert_eq!(
            evaluate_trajectory_costs(&t, &spec, MaxRange::ExcludeFinal).unwrap(),
            vec![20.0]
        );
    }

    #[test]
    fn zero_step_trajectory_costs_nothing() {
        let spec = CostSpec::new(vec![
            Objective::uniform(Aggregation::Sum, 4.0),
            Objective::uniform(Aggregation::Max, 4.0),
        ]);
        let t = traj(&[2], &[], Some(0));
        assert_eq!(
            evaluate_trajectory_costs(&t, &spec, MaxRange::default()).unwrap(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn incomplete_trajectory_rejected() {
        let spec = CostSpec::new(vec![Objective::uniform(Aggregation::Sum, 1.0)]);
        let t = traj(&[0, 1], &[0], None);
        assert!(matches!(
            evaluate_trajectory_costs(&t, &spec, MaxRange::default()),
            Err(Error::MissingHittingTime)
        ));
    }

    #[test]
    fn consistency_check() {
        let sys = line(3, 1.0);
        assert!(traj(&[0, 1, 2], &[0, 0], Some(2)).is_consistent(&sys));
        assert!(!traj(&[0, 1, 2], &[0], Some(2)).is_consistent(&sys));
        assert!(!traj(&[0, 1], &[0], Some(1)).is_consistent(&sys));
    }
}
