//! Infinite-horizon value iteration for one max-aggregated objective.
//!
//! The state is augmented with the running maximum `λ` of the one-step
//! costs seen so far. `λ` only ever takes values in
//! `{0} ∪ range(c)`, so the augmented space is finite and indexed by
//! [`LambdaDomain`] positions. Since the domain is sorted, the update
//! `max(λ, c)` is just a max of indices.

use std::io;

use rayon::prelude::*;

use crate::mdp::{
    ActionId, Aggregation, CostSpec, DecisionAdapter, DeterministicPolicy, Objective, Policy,
    StateId, System,
};
use crate::{Error, Result};

/// Sorted distinct values the running maximum can take; always starts at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaDomain {
    values: Vec<f64>,
}

impl LambdaDomain {
    /// `{0}` together with `costs`, sorted and deduplicated.
    pub fn from_costs(costs: impl IntoIterator<Item = f64>) -> Self {
        let mut values: Vec<f64> = std::iter::once(0.0).chain(costs).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        LambdaDomain { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.values.binary_search_by(|x| x.total_cmp(&v)).ok()
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("domain contains 0")
    }
}

/// Domain of objective `k` over every edge of `sys`.
pub fn build_lambda_domain(sys: &System, spec: &CostSpec, k: usize) -> Result<LambdaDomain> {
    let obj = max_objective(spec, k)?;
    Ok(LambdaDomain::from_costs(obj.tabulate(sys).values()))
}

fn max_objective(spec: &CostSpec, k: usize) -> Result<&Objective> {
    match spec.objectives.get(k) {
        Some(o) if o.aggregation == Aggregation::Max => Ok(o),
        _ => Err(Error::NotMaxObjective(k)),
    }
}

/// Per-edge cost expressed as a domain index, `[s][choice][succ]`.
#[derive(Debug, Clone)]
pub(crate) struct CostIndex {
    rows: Vec<Vec<Vec<usize>>>,
}

impl CostIndex {
    pub(crate) fn new(sys: &System, obj: &Objective, domain: &LambdaDomain) -> Self {
        let rows = sys
            .states()
            .map(|s| {
                sys.choices(s)
                    .iter()
                    .map(|c| {
                        c.successors
                            .iter()
                            .map(|x| {
                                domain
                                    .index_of(obj.cost(s, c.action, x.state))
                                    .expect("domain built from the same costs")
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        CostIndex { rows }
    }

    pub(crate) fn choice(&self, s: StateId, ci: usize) -> &[usize] {
        &self.rows[s.0][ci]
    }
}

/// `J(s, λ)` over `S × Λ`, row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxValueTable {
    domain: LambdaDomain,
    num_states: usize,
    values: Vec<f64>,
}

impl MaxValueTable {
    /// `J0(s, λ) = λ` everywhere: whatever happens next, the running
    /// maximum is already paid. Starting here keeps every iterate `≥ λ`,
    /// also when some policies loop forever.
    pub fn initial(sys: &System, domain: LambdaDomain) -> Self {
        let l = domain.len();
        let values = (0..sys.num_states() * l).map(|x| domain.value(x % l)).collect();
        MaxValueTable {
            domain,
            num_states: sys.num_states(),
            values,
        }
    }

    /// Table with the given values; `values.len()` must be `|S|·|Λ|`.
    pub fn from_values(domain: LambdaDomain, num_states: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), num_states * domain.len());
        MaxValueTable {
            domain,
            num_states,
            values,
        }
    }

    pub fn domain(&self) -> &LambdaDomain {
        &self.domain
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn get(&self, s: StateId, lambda: usize) -> f64 {
        self.values[s.0 * self.domain.len() + lambda]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        let l = self.domain.len();
        &self.values[s.0 * l..(s.0 + 1) * l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_distance(&self, other: &MaxValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `state,lambda,value`.
    pub fn write_csv<W: io::Write>(&self, sys: &System, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "lambda", "value"])?;
        for s in sys.states() {
            for i in 0..self.domain.len() {
                w.write_record([
                    sys.state_name(s).to_string(),
                    self.domain.value(i).to_string(),
                    self.get(s, i).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn q_value(sys: &System, idx: &CostIndex, j: &[f64], l: usize, s: StateId, ci: usize, lambda: usize) -> f64 {
    sys.choices(s)[ci]
        .successors
        .iter()
        .zip(idx.choice(s, ci))
        .map(|(x, &c)| x.prob * j[x.state.0 * l + lambda.max(c)])
        .sum()
}

/// Lowest-index minimizer of the Q-values at `(s, λ)`.
fn best_choice(sys: &System, idx: &CostIndex, j: &[f64], l: usize, s: StateId, lambda: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for ci in 0..sys.choices(s).len() {
        let q = q_value(sys, idx, j, l, s, ci, lambda);
        if best.is_none_or(|(_, b)| q < b) {
            best = Some((ci, q));
        }
    }
    best
}

fn backup_row(sys: &System, idx: &CostIndex, j: &[f64], l: usize, s: StateId, row: &mut [f64]) {
    if sys.is_target(s) {
        return;
    }
    for (lambda, out) in row.iter_mut().enumerate() {
        if let Some((_, q)) = best_choice(sys, idx, j, l, s, lambda) {
            *out = q;
        }
    }
}

/// One synchronous sweep of `(BJ)(s,λ) = min_a Σ P(s'|s,a) J(s', max(λ, c))`
/// over all non-target cells. Target rows, and states without admissible
/// actions, are copied unchanged.
pub fn bellman_backup_max(j: &MaxValueTable, sys: &System, spec: &CostSpec, k: usize) -> Result<MaxValueTable> {
    let obj = max_objective(spec, k)?;
    let idx = CostIndex::new(sys, obj, &j.domain);
    Ok(sweep_jacobi(j, sys, &idx))
}

fn sweep_jacobi(j: &MaxValueTable, sys: &System, idx: &CostIndex) -> MaxValueTable {
    let l = j.domain.len();
    let mut next = j.values.clone();
    next.par_chunks_mut(l).enumerate().for_each(|(s, row)| {
        backup_row(sys, idx, &j.values, l, StateId(s), row);
    });
    MaxValueTable {
        domain: j.domain.clone(),
        num_states: j.num_states,
        values: next,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sweep {
    /// Every cell reads the previous table.
    #[default]
    Jacobi,
    /// Cells are updated in place, states then λ ascending.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxViOptions {
    pub tol: f64,
    /// Defaults to `10·|S|·|Λ|`.
    pub max_iter: Option<usize>,
    pub sweep: Sweep,
}

impl Default for MaxViOptions {
    fn default() -> Self {
        MaxViOptions {
            tol: 1e-9,
            max_iter: None,
            sweep: Sweep::Jacobi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxSolve {
    pub table: MaxValueTable,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterate [`bellman_backup_max`] from `J0` until the sup-norm change
/// drops below `tol` or the iteration budget runs out. Non-convergence is
/// reported in the result, not as an error.
pub fn value_iterate_max(sys: &System, spec: &CostSpec, k: usize, opts: MaxViOptions) -> Result<MaxSolve> {
    let domain = build_lambda_domain(sys, spec, k)?;
    let idx = CostIndex::new(sys, &spec.objectives[k], &domain);
    let l = domain.len();
    let max_iter = opts.max_iter.unwrap_or(10 * sys.num_states() * l);
    let mut table = MaxValueTable::initial(sys, domain);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let change = match opts.sweep {
            Sweep::Jacobi => {
                let next = sweep_jacobi(&table, sys, &idx);
                let d = next.sup_distance(&table);
                table = next;
                d
            }
            Sweep::GaussSeidel => {
                let mut d: f64 = 0.0;
                for s in sys.states().filter(|s| !sys.is_target(*s)) {
                    for lambda in 0..l {
                        if let Some((_, q)) = best_choice(sys, &idx, &table.values, l, s, lambda) {
                            let cell = &mut table.values[s.0 * l + lambda];
                            d = d.max((q - *cell).abs());
                            *cell = q;
                        }
                    }
                }
                d
            }
        };
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(MaxSolve {
        table,
        iterations,
        converged,
    })
}

/// Deterministic policy over `(s, λ-index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPolicy {
    domain: LambdaDomain,
    actions: Vec<Option<ActionId>>,
}

impl MaxPolicy {
    pub fn domain(&self) -> &LambdaDomain {
        &self.domain
    }

    pub fn get(&self, s: StateId, lambda: usize) -> Option<ActionId> {
        self.actions[s.0 * self.domain.len() + lambda]
    }

    /// CSV with columns `state,lambda,action`; undefined cells are skipped.
    pub fn write_csv<W: io::Write>(&self, sys: &System, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "lambda", "action"])?;
        for s in sys.states() {
            for i in 0..self.domain.len() {
                if let Some(a) = self.get(s, i) {
                    w.write_record([
                        sys.state_name(s),
                        &self.domain.value(i).to_string(),
                        sys.action_name(a),
                    ])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

impl Policy<(StateId, usize)> for MaxPolicy {
    fn distribution(&self, decision: &(StateId, usize)) -> Vec<(ActionId, f64)> {
        self.get(decision.0, decision.1)
            .map(|a| vec![(a, 1.0)])
            .unwrap_or_default()
    }
}

/// Greedy policy from a value table, lowest action index on ties; defined
/// on every non-target `(s, λ)` with an admissible action.
pub fn extract_policy_max(j: &MaxValueTable, sys: &System, spec: &CostSpec, k: usize) -> Result<MaxPolicy> {
    let obj = max_objective(spec, k)?;
    let idx = CostIndex::new(sys, obj, &j.domain);
    let l = j.domain.len();
    let mut actions = vec![None; sys.num_states() * l];
    for s in sys.states().filter(|s| !sys.is_target(*s)) {
        for lambda in 0..l {
            actions[s.0 * l + lambda] =
                best_choice(sys, &idx, &j.values, l, s, lambda).map(|(ci, _)| sys.choices(s)[ci].action);
        }
    }
    Ok(MaxPolicy {
        domain: j.domain.clone(),
        actions,
    })
}

/// Simulation adapter carrying the running maximum as a domain index.
#[derive(Debug, Clone)]
pub struct LambdaTracker {
    objective: Objective,
    domain: LambdaDomain,
}

impl LambdaTracker {
    pub fn new(spec: &CostSpec, k: usize, domain: LambdaDomain) -> Result<Self> {
        Ok(LambdaTracker {
            objective: max_objective(spec, k)?.clone(),
            domain,
        })
    }
}

impl DecisionAdapter for LambdaTracker {
    type Decision = (StateId, usize);

    fn start(&self, _: &System, s0: StateId) -> (StateId, usize) {
        (s0, 0)
    }

    fn advance(&self, _: &System, cur: &(StateId, usize), s: StateId, a: ActionId, next: StateId) -> (StateId, usize) {
        let c = self.objective.cost(s, a, next);
        let i = self.domain.index_of(c).expect("cost within domain");
        (next, cur.1.max(i))
    }
}

#[derive(Debug, Clone)]
pub struct NaiveSolve {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Fixed point of `J(s) = min_a Σ P(s'|s,a) max(c(s,a,s'), J(s'))` with
/// `J = 0` on targets. This recursion ignores the history of the running
/// maximum and is not a correct evaluation of the expected maximum on
/// stochastic systems; it is kept for comparison.
pub fn naive_value_iterate(sys: &System, spec: &CostSpec, k: usize, tol: f64, max_iter: usize) -> Result<NaiveSolve> {
    let obj = max_objective(spec, k)?;
    let table = obj.tabulate(sys);
    let mut values = vec![0.0; sys.num_states()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let next: Vec<f64> = sys
            .states()
            .map(|s| {
                if sys.is_target(s) {
                    return 0.0;
                }
                naive_q(sys, &table, &values, s)
                    .map(|(_, q)| q)
                    .unwrap_or(values[s.0])
            })
            .collect();
        let change = values
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(NaiveSolve {
        values,
        iterations,
        converged,
    })
}

fn naive_q(sys: &System, table: &crate::mdp::CostTable, values: &[f64], s: StateId) -> Option<(ActionId, f64)> {
    let mut best: Option<(ActionId, f64)> = None;
    for (ci, c) in sys.choices(s).iter().enumerate() {
        let q: f64 = c
            .successors
            .iter()
            .zip(table.choice(s, ci))
            .map(|(x, cost)| x.prob * cost.max(values[x.state.0]))
            .sum();
        if best.is_none_or(|(_, b)| q < b) {
            best = Some((c.action, q));
        }
    }
    best
}

/// Greedy memoryless policy for the naive recursion.
pub fn naive_greedy_policy(sys: &System, spec: &CostSpec, k: usize, values: &[f64]) -> Result<DeterministicPolicy<StateId>> {
    let table = max_objective(spec, k)?.tabulate(sys);
    Ok(sys
        .states()
        .filter(|s| !sys.is_target(*s))
        .filter_map(|s| naive_q(sys, &table, values, s).map(|(a, _)| (s, a)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{sample_trajectory, SystemBuilder};
    use proptest::prelude::*;

    fn max_spec(obj: Objective) -> CostSpec {
        CostSpec::new(vec![obj])
    }

    #[test]
    fn domain_from_gateway_costs() {
        let d = LambdaDomain::from_costs([20.0, 90.0, 20.0, 30.0, 20.0]);
        assert_eq!(d.values(), &[0.0, 20.0, 30.0, 90.0]);
        assert_eq!(LambdaDomain::from_costs([7.5]).values(), &[0.0, 7.5]);
        assert_eq!(LambdaDomain::from_costs([3.0, 1.0, 2.0]).values(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn domain_requires_max_objective() {
        let sys = SystemBuilder::with_counts(1, 1).build();
        let spec = CostSpec::new(vec![Objective::uniform(Aggregation::Sum, 1.0)]);
        assert!(matches!(build_lambda_domain(&sys, &spec, 0), Err(Error::NotMaxObjective(0))));
        assert!(matches!(build_lambda_domain(&sys, &spec, 3), Err(Error::NotMaxObjective(3))));
    }

    fn edge(cost: f64) -> (System, CostSpec) {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 1.0).target(1);
        let sys = b.build();
        (sys, max_spec(Objective::uniform(Aggregation::Max, cost)))
    }

    #[test]
    fn single_edge_backup() {
        let (sys, _) = edge(30.0);
        // Domain {0, 30, 90} so that λ = 90 is representable.
        let spec = max_spec(Objective::uniform(Aggregation::Max, 30.0));
        let domain = LambdaDomain::from_costs([30.0, 90.0]);
        let j0 = MaxValueTable::initial(&sys, domain);
        let j1 = bellman_backup_max(&j0, &sys, &spec, 0).unwrap();
        assert_eq!(j1.get(StateId(0), 0), 30.0);
        assert_eq!(j1.get(StateId(0), 2), 90.0);
        // Target rows untouched, input not mutated.
        assert_eq!(j1.row(StateId(1)), &[0.0, 30.0, 90.0]);
        assert_eq!(j0.get(StateId(0), 0), 0.0);
    }

    #[test]
    fn branch_expectation() {
        let mut b = SystemBuilder::with_counts(3, 1);
        b.transition(0, 0, 1, 0.5).transition(0, 0, 2, 0.5).target(1).target(2);
        let sys = b.build();
        let spec = max_spec(Objective::uniform(Aggregation::Max, 20.0).with_cost(0, 0, 2, 90.0));
        let d = build_lambda_domain(&sys, &spec, 0).unwrap();
        let j = bellman_backup_max(&MaxValueTable::initial(&sys, d), &sys, &spec, 0).unwrap();
        assert_eq!(j.get(StateId(0), 0), 55.0);
    }

    #[test]
    fn chain_converges_quickly() {
        let (sys, spec) = edge(30.0);
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 2);
        assert_eq!(sol.table.get(StateId(0), 0), 30.0);
    }

    /// 0 → {1, 2} → 3 with bottlenecks 90 (via 1) and 30 (via 2).
    fn diamond() -> (System, CostSpec) {
        let mut b = SystemBuilder::with_counts(4, 2);
        b.transition(0, 0, 1, 1.0).transition(0, 1, 2, 1.0);
        b.transition(1, 0, 3, 1.0).transition(2, 0, 3, 1.0);
        b.target(3);
        let spec = max_spec(
            Objective::uniform(Aggregation::Max, 10.0)
                .with_cost(1, 0, 3, 90.0)
                .with_cost(0, 1, 2, 30.0),
        );
        (b.build(), spec)
    }

    /// Smallest bottleneck over all simple paths of a deterministic graph.
    fn brute_bottleneck(sys: &System, obj: &Objective, s: StateId, seen: &mut Vec<StateId>) -> f64 {
        if sys.is_target(s) {
            return 0.0;
        }
        seen.push(s);
        let mut best = f64::INFINITY;
        for c in sys.choices(s) {
            let next = c.successors[0].state;
            if !seen.contains(&next) {
                let rest = brute_bottleneck(sys, obj, next, seen);
                best = best.min(obj.cost(s, c.action, next).max(rest));
            }
        }
        seen.pop();
        best
    }

    #[test]
    fn diamond_takes_smaller_bottleneck() {
        let (sys, spec) = diamond();
        let oracle = brute_bottleneck(&sys, &spec.objectives[0], StateId(0), &mut vec![]);
        assert_eq!(oracle, 30.0);
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        assert_eq!(sol.table.get(StateId(0), 0), oracle);
        let pol = extract_policy_max(&sol.table, &sys, &spec, 0).unwrap();
        assert_eq!(pol.get(StateId(0), 0), Some(ActionId(1)));
        assert_eq!(pol.get(StateId(3), 0), None);
    }

    #[test]
    fn gauss_seidel_agrees() {
        let (sys, spec) = diamond();
        let opts = MaxViOptions {
            sweep: Sweep::GaussSeidel,
            ..MaxViOptions::default()
        };
        let gs = value_iterate_max(&sys, &spec, 0, opts).unwrap();
        let jac = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        assert!(gs.converged);
        assert!(gs.table.sup_distance(&jac.table) < 1e-12);
    }

    #[test]
    fn ties_go_to_lowest_action() {
        let mut b = SystemBuilder::with_counts(2, 3);
        for a in 0..3 {
            b.transition(0, a, 1, 1.0);
        }
        b.target(1);
        let sys = b.build();
        let spec = max_spec(Objective::uniform(Aggregation::Max, 5.0));
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        for _ in 0..3 {
            let pol = extract_policy_max(&sol.table, &sys, &spec, 0).unwrap();
            assert_eq!(pol.get(StateId(0), 0), Some(ActionId(0)));
        }
    }

    #[test]
    fn naive_matches_on_deterministic_systems() {
        let (sys, spec) = diamond();
        let naive = naive_value_iterate(&sys, &spec, 0, 1e-12, 100).unwrap();
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        for s in sys.states() {
            assert_eq!(naive.values[s.0], sol.table.get(s, 0));
        }
        assert_eq!(naive.values[3], 0.0);
    }

    #[test]
    fn naive_understates_risky_loop() {
        // 0 -a-> 1 (5), 0 -b-> 2 (6); 1 -a-> {2: ½ cost 1, 1: ½ cost 8}.
        let mut b = SystemBuilder::with_counts(3, 2);
        b.transition(0, 0, 1, 1.0).transition(0, 1, 2, 1.0);
        b.transition(1, 0, 2, 0.5).transition(1, 0, 1, 0.5);
        b.target(2);
        let sys = b.build();
        let spec = max_spec(
            Objective::uniform(Aggregation::Max, 1.0)
                .with_cost(0, 0, 1, 5.0)
                .with_cost(0, 1, 2, 6.0)
                .with_cost(1, 0, 1, 8.0),
        );
        let naive = naive_value_iterate(&sys, &spec, 0, 1e-12, 10_000).unwrap();
        assert!(naive.converged);
        assert!((naive.values[0] - 5.0).abs() < 1e-9);
        let pol = naive_greedy_policy(&sys, &spec, 0, &naive.values).unwrap();
        assert_eq!(pol.get(&StateId(0)), Some(ActionId(0)));
        // Under that policy the maximum is 5 with prob ½ and 8 otherwise.
        let true_cost = 0.5 * 5.0 + 0.5 * 8.0;
        assert!(true_cost - naive.values[0] > 1.0);
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        assert!((sol.table.get(StateId(0), 0) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn free_loop_traps_greedy_policy() {
        // 0 ⇄ 1 at cost 1; exiting 0 costs 5.
        let mut b = SystemBuilder::new(["s0", "s1", "t"], ["loop", "exit"]);
        b.transition(0, 0, 1, 1.0);
        b.transition(1, 0, 0, 1.0);
        b.transition(0, 1, 2, 0.9).transition(0, 1, 1, 0.1);
        b.target(2);
        let sys = b.build();
        let spec = max_spec(Objective::uniform(Aggregation::Max, 1.0).with_cost(0, 1, 2, 5.0));
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        let pol = extract_policy_max(&sol.table, &sys, &spec, 0).unwrap();
        assert_eq!(pol.get(StateId(0), 0), Some(ActionId(0)));
        let tracker = LambdaTracker::new(&spec, 0, sol.table.domain().clone()).unwrap();
        for seed in 0..20 {
            let t = sample_trajectory(&sys, &pol, &tracker, StateId(0), seed, 30).unwrap();
            assert_eq!(t.hitting_time, None);
        }
    }

    #[test]
    fn csv_dumps() {
        let (sys, spec) = edge(30.0);
        let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
        let mut buf = Vec::new();
        sol.table.write_csv(&sys, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "state,lambda,value\ns0,0,30\ns0,30,30\ns1,0,0\ns1,30,30\n");
        let mut buf = Vec::new();
        extract_policy_max(&sol.table, &sys, &spec, 0)
            .unwrap()
            .write_csv(&sys, &mut buf)
            .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "state,lambda,action\ns0,0,a0\ns0,30,a0\n");
    }

    /// Random instance with target `n-1`; when `acyclic`, every edge moves
    /// to a higher index so every policy reaches the target.
    fn random_instance(acyclic: bool) -> impl Strategy<Value = (System, CostSpec)> {
        (2usize..6).prop_flat_map(|n| {
            let rows = prop::collection::vec(
                prop::collection::vec(prop::collection::vec((0..n, 1u32..4, 1u32..6), 1..4), 1..4),
                n - 1,
            );
            (Just(n), rows)
        })
        .prop_map(move |(n, rows)| {
            let mut b = SystemBuilder::with_counts(n, 3);
            let mut obj = Objective::uniform(Aggregation::Max, 1.0);
            for (s, row) in rows.into_iter().enumerate() {
                for (a, succ) in row.into_iter().enumerate() {
                    let total: u32 = succ.iter().map(|x| x.1).sum();
                    for (to, w, c) in succ {
                        let to = if acyclic { s + 1 + to % (n - 1 - s) } else { to };
                        b.transition(s, a, to, w as f64 / total as f64);
                        obj = obj.with_cost(s, a, to, c as f64 * 10.0);
                    }
                }
            }
            b.target(n - 1);
            (b.build(), max_spec(obj))
        })
    }

    proptest! {
        #[test]
        fn backup_is_monotone((sys, spec) in random_instance(false), seed in prop::collection::vec(0.0f64..1.0, 64)) {
            let d = build_lambda_domain(&sys, &spec, 0).unwrap();
            let l = d.len();
            let n = sys.num_states();
            let top = d.max_value();
            let mut lo = MaxValueTable::initial(&sys, d.clone()).values().to_vec();
            let mut hi = lo.clone();
            for s in 0..n {
                if sys.is_target(StateId(s)) { continue; }
                for i in 0..l {
                    let u = seed[(s * l + i) % seed.len()];
                    let v = seed[(s * l + i + 7) % seed.len()];
                    lo[s * l + i] = top * u.min(v);
                    hi[s * l + i] = top * u.max(v);
                }
            }
            let lo = MaxValueTable::from_values(d.clone(), n, lo);
            let hi = MaxValueTable::from_values(d, n, hi);
            let blo = bellman_backup_max(&lo, &sys, &spec, 0).unwrap();
            let bhi = bellman_backup_max(&hi, &sys, &spec, 0).unwrap();
            for (a, b) in blo.values().iter().zip(bhi.values()) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn fixed_point_invariants((sys, spec) in random_instance(false)) {
            let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
            let d = sol.table.domain();
            for s in sys.states() {
                let row = sol.table.row(s);
                for i in 0..d.len() {
                    prop_assert!(row[i] >= 0.0 && row[i] <= d.max_value() + 1e-9);
                    if i > 0 {
                        prop_assert!(row[i - 1] <= row[i] + 1e-9);
                    }
                    if sys.is_target(s) {
                        prop_assert_eq!(row[i], d.value(i));
                    }
                }
            }
        }

        #[test]
        fn value_dominates_running_max((sys, spec) in random_instance(false)) {
            let sol = value_iterate_max(&sys, &spec, 0, MaxViOptions::default()).unwrap();
            let d = sol.table.domain();
            for s in sys.states() {
                for i in 0..d.len() {
                    prop_assert!(sol.table.get(s, i) >= d.value(i) - 1e-9);
                }
            }
        }
    }
}
