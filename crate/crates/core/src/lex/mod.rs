//! Finite-horizon lexicographic value iteration over `(h, s, q, λ)`.
//!
//! `h` counts the steps remaining, `(s, q)` is a product state and `λ`
//! holds one running-maximum index per max-aggregated objective (encoded
//! mixed-radix as a single "combo" number). Objectives are processed in
//! priority order: objective `k` is minimized over the actions that
//! survived the `ε`-filters of objectives `0..k`.

mod run;

use rayon::prelude::*;

use crate::maxssp::{CostIndex, LambdaDomain};
use crate::mdp::{ActionId, Aggregation, CostSpec, CostTable, StateId};
use crate::product::{HorizonPolicy, ProductSystem};
use crate::{Error, Result};

pub use run::{run_policy, AugDecision, LexAdapter, RunRecord, RunStats};

/// Slack for the `ε`-optimal action sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// `1e-6 · max(1, |min Q_k|)`, per augmented state and objective.
    Auto,
    Absolute(f64),
}

impl Epsilon {
    fn at(self, best: f64) -> f64 {
        match self {
            Epsilon::Auto => 1e-6 * best.abs().max(1.0),
            Epsilon::Absolute(e) => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub horizon: usize,
    pub c_fail: f64,
    pub epsilon: Epsilon,
    /// Spread each horizon layer over the rayon pool.
    pub parallel: bool,
    /// Upper bound on the solution tables, in bytes.
    pub memory_cap_bytes: u128,
}

pub const DEFAULT_MEMORY_CAP: u128 = 4 << 30;

impl SolverConfig {
    pub fn new(horizon: usize, c_fail: f64) -> Self {
        SolverConfig {
            horizon,
            c_fail,
            epsilon: Epsilon::Auto,
            parallel: true,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_epsilon(mut self, epsilon: Epsilon) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.c_fail.is_finite() && self.c_fail > 0.0) {
            return Err(Error::InvalidConfig(format!("c_fail must be positive, got {}", self.c_fail)));
        }
        if let Epsilon::Absolute(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::InvalidConfig(format!("epsilon must be nonnegative, got {e}")));
            }
        }
        Ok(())
    }

    /// Warnings for a penalty that does not dominate every horizon-long
    /// accumulation of one-step costs.
    pub fn warnings(&self, prod: &ProductSystem, spec: &CostSpec) -> Vec<String> {
        let sys = prod.base();
        let mut out = Vec::new();
        for (k, obj) in spec.objectives.iter().enumerate() {
            let top = obj.tabulate(sys).values().fold(0.0, f64::max);
            let bound = self.horizon as f64 * top;
            if self.c_fail <= bound {
                out.push(format!(
                    "c_fail = {} does not exceed H * max cost = {bound} for objective {k}",
                    self.c_fail
                ));
            }
        }
        out
    }
}

/// Decoded augmented state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AugmentedState {
    pub h: usize,
    /// Product state index.
    pub p: usize,
    /// One domain index per max-aggregated objective.
    pub lambdas: Vec<usize>,
}

/// Running-maximum bookkeeping shared by the solver and the simulator.
#[derive(Debug, Clone)]
pub(crate) struct LambdaSpace {
    /// Objective index of each tracked maximum.
    pub(crate) objectives: Vec<usize>,
    pub(crate) domains: Vec<LambdaDomain>,
    strides: Vec<usize>,
    /// Per tracked maximum, base edge costs as domain indices.
    costs: Vec<CostIndex>,
    pub(crate) combos: usize,
}

impl LambdaSpace {
    pub(crate) fn new(prod: &ProductSystem, spec: &CostSpec) -> Self {
        let sys = prod.base();
        let objectives = spec.max_objectives();
        let domains: Vec<LambdaDomain> = objectives
            .iter()
            .map(|&k| LambdaDomain::from_costs(spec.objectives[k].tabulate(sys).values()))
            .collect();
        let mut strides = Vec::with_capacity(domains.len());
        let mut combos = 1usize;
        for d in &domains {
            strides.push(combos);
            combos = combos.saturating_mul(d.len());
        }
        let costs = objectives
            .iter()
            .zip(&domains)
            .map(|(&k, d)| CostIndex::new(sys, &spec.objectives[k], d))
            .collect();
        LambdaSpace {
            objectives,
            domains,
            strides,
            costs,
            combos,
        }
    }

    pub(crate) fn decode(&self, combo: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.domains)
            .map(|(st, d)| combo / st % d.len())
            .collect()
    }

    pub(crate) fn encode(&self, lambdas: &[usize]) -> usize {
        lambdas.iter().zip(&self.strides).map(|(l, st)| l * st).sum()
    }

    /// Combo after the `j`-th successor of choice `ci` at base state `s`.
    pub(crate) fn step(&self, combo: usize, s: StateId, ci: usize, j: usize) -> usize {
        let mut out = 0;
        for m in 0..self.domains.len() {
            let cur = combo / self.strides[m] % self.domains[m].len();
            out += cur.max(self.costs[m].choice(s, ci)[j]) * self.strides[m];
        }
        out
    }

    /// Value of the tracked maximum for objective `k`, if `k` is tracked.
    fn lambda_value(&self, combo: usize, k: usize) -> Option<f64> {
        let m = self.objectives.iter().position(|&o| o == k)?;
        Some(self.domains[m].value(combo / self.strides[m] % self.domains[m].len()))
    }
}

const NO_ACTION: u32 = u32::MAX;

/// Value tables, filtered action sets and policy for every `(h, p, combo)`.
///
/// Action sets are stored as bitmasks over the positions of the product
/// state's choices (at most 64 admissible actions per state).
#[derive(Debug, Clone)]
pub struct LexSolution {
    horizon: usize,
    c_fail: f64,
    epsilon: Epsilon,
    aggregations: Vec<Aggregation>,
    num_product: usize,
    lambda: LambdaSpace,
    values: Vec<f64>,
    masks: Vec<u64>,
    policy: Vec<u32>,
    pub warnings: Vec<String>,
}

/// Bytes per augmented state: `K` values, `K` masks and one action.
fn bytes_per_state(k: usize) -> u128 {
    (k as u128) * 16 + 4
}

/// Backward induction `h = 0..=H` over the product.
pub fn solve_lexicographic(prod: &ProductSystem, spec: &CostSpec, cfg: &SolverConfig) -> Result<LexSolution> {
    cfg.check()?;
    if spec.is_empty() {
        return Err(Error::InvalidConfig("at least one objective is required".into()));
    }
    let sys = prod.base();
    for p in 0..prod.num_states() {
        let n = prod.choices(p).len();
        if n > 64 {
            return Err(Error::TooManyActions {
                state: prod.name(p),
                count: n,
            });
        }
    }
    let lambda = LambdaSpace::new(prod, spec);
    let k = spec.len();
    let n_p = prod.num_states();
    let layer_states = n_p as u128 * lambda.combos as u128;
    let augmented = (cfg.horizon as u128 + 1) * layer_states;
    let required = augmented * bytes_per_state(k);
    if required > cfg.memory_cap_bytes {
        let lambdas: u128 = lambda.domains.iter().map(|d| d.len() as u128).product();
        return Err(Error::SolverCapacity {
            required_bytes: required,
            augmented_states: augmented,
            full_space: (cfg.horizon as u128 + 1)
                * sys.num_states() as u128
                * prod.dfa().num_states() as u128
                * lambdas,
            cap_bytes: cfg.memory_cap_bytes,
        });
    }
    let augmented = augmented as usize;
    let layer = layer_states as usize;

    let sums: Vec<Option<CostTable>> = spec
        .objectives
        .iter()
        .map(|o| (o.aggregation == Aggregation::Sum).then(|| o.tabulate(sys)))
        .collect();
    let ctx = Ctx {
        prod,
        lambda: &lambda,
        sums: &sums,
        k,
        c_fail: cfg.c_fail,
        epsilon: cfg.epsilon,
    };

    let mut values = vec![0.0; augmented * k];
    let mut masks = vec![0u64; augmented * k];
    let mut policy = vec![NO_ACTION; augmented];
    let per_p = lambda.combos;
    for h in 0..=cfg.horizon {
        let (done, rest) = values.split_at_mut(h * layer * k);
        let prev: &[f64] = if h == 0 { &[] } else { &done[(h - 1) * layer * k..] };
        let cur = &mut rest[..layer * k];
        let cur_masks = &mut masks[h * layer * k..(h + 1) * layer * k];
        let cur_policy = &mut policy[h * layer..(h + 1) * layer];
        #[allow(clippy::type_complexity)]
        let job = |(p, ((vals, msks), pol)): (usize, ((&mut [f64], &mut [u64]), &mut [u32]))| {
            ctx.fill(h, p, prev, vals, msks, pol);
        };
        if cfg.parallel {
            cur.par_chunks_mut(per_p * k)
                .zip(cur_masks.par_chunks_mut(per_p * k))
                .zip(cur_policy.par_chunks_mut(per_p))
                .enumerate()
                .for_each(job);
        } else {
            cur.chunks_mut(per_p * k)
                .zip(cur_masks.chunks_mut(per_p * k))
                .zip(cur_policy.chunks_mut(per_p))
                .enumerate()
                .for_each(job);
        }
    }

    Ok(LexSolution {
        horizon: cfg.horizon,
        c_fail: cfg.c_fail,
        epsilon: cfg.epsilon,
        aggregations: spec.aggregations(),
        num_product: n_p,
        lambda,
        values,
        masks,
        policy,
        warnings: cfg.warnings(prod, spec),
    })
}

struct Ctx<'a> {
    prod: &'a ProductSystem,
    lambda: &'a LambdaSpace,
    sums: &'a [Option<CostTable>],
    k: usize,
    c_fail: f64,
    epsilon: Epsilon,
}

impl Ctx<'_> {
    /// Q-values `q[ci * K + k]` at `(h, p, combo)` from layer `h - 1`.
    fn q_values(&self, p: usize, combo: usize, prev: &[f64], q: &mut Vec<f64>) {
        let k = self.k;
        let combos = self.lambda.combos;
        let s = self.prod.state(p).s;
        q.clear();
        for (ci, choice) in self.prod.choices(p).iter().enumerate() {
            let base = q.len();
            q.resize(base + k, 0.0);
            for (j, &to) in choice.successors.iter().enumerate() {
                let prob = self.prod.prob(p, ci, j);
                let next = self.lambda.step(combo, s, ci, j);
                let at = (to * combos + next) * k;
                for obj in 0..k {
                    let step = self.sums[obj].as_ref().map_or(0.0, |t| t.get(s, ci, j));
                    q[base + obj] += prob * (prev[at + obj] + step);
                }
            }
        }
    }

    fn fill(&self, h: usize, p: usize, prev: &[f64], vals: &mut [f64], masks: &mut [u64], pol: &mut [u32]) {
        let k = self.k;
        let mut q = Vec::new();
        for combo in 0..self.lambda.combos {
            let v = &mut vals[combo * k..(combo + 1) * k];
            let m = &mut masks[combo * k..(combo + 1) * k];
            if self.prod.is_target(p) {
                for (obj, out) in v.iter_mut().enumerate() {
                    *out = self.lambda.lambda_value(combo, obj).unwrap_or(0.0);
                }
                continue;
            }
            if self.prod.is_sink(p) || h == 0 || self.prod.choices(p).is_empty() {
                v.fill(self.c_fail);
                continue;
            }
            self.q_values(p, combo, prev, &mut q);
            let n = self.prod.choices(p).len();
            let mut allowed: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            for obj in 0..k {
                let (kept, best) = filter_mask(|ci| q[ci * k + obj], allowed, n, self.epsilon);
                v[obj] = best;
                m[obj] = kept;
                allowed = kept;
            }
            let last = k - 1;
            let chosen = (0..n)
                .filter(|ci| allowed >> ci & 1 == 1)
                .fold(None, |best: Option<usize>, ci| match best {
                    Some(b) if q[b * k + last] <= q[ci * k + last] => Some(b),
                    _ => Some(ci),
                })
                .expect("filtered set is nonempty");
            pol[combo] = self.prod.choices(p)[chosen].action.0 as u32;
        }
    }
}

/// Positions in `allowed` whose value is within `ε` of the minimum over
/// `allowed`, together with that minimum.
fn filter_mask(q: impl Fn(usize) -> f64, allowed: u64, n: usize, epsilon: Epsilon) -> (u64, f64) {
    let best = (0..n)
        .filter(|ci| allowed >> ci & 1 == 1)
        .map(&q)
        .fold(f64::INFINITY, f64::min);
    assert!(best.is_finite(), "empty or non-finite action set");
    let slack = epsilon.at(best);
    let kept = (0..n)
        .filter(|ci| allowed >> ci & 1 == 1 && q(*ci) <= best + slack)
        .fold(0u64, |m, ci| m | 1 << ci);
    (kept, best)
}

/// Actions whose value is within absolute slack `epsilon` of the best one.
/// The input lists the admissible actions with their values.
pub fn epsilon_filter(q: &[(ActionId, f64)], epsilon: f64) -> Vec<ActionId> {
    let best = q.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    q.iter()
        .filter(|x| x.1 <= best + epsilon)
        .map(|x| x.0)
        .collect()
}

impl LexSolution {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn c_fail(&self) -> f64 {
        self.c_fail
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn num_objectives(&self) -> usize {
        self.aggregations.len()
    }

    pub fn aggregations(&self) -> &[Aggregation] {
        &self.aggregations
    }

    pub fn num_product_states(&self) -> usize {
        self.num_product
    }

    pub fn num_combos(&self) -> usize {
        self.lambda.combos
    }

    /// Objective indices that carry a running maximum, in `λ` order.
    pub fn max_objectives(&self) -> &[usize] {
        &self.lambda.objectives
    }

    pub fn lambda_domains(&self) -> &[LambdaDomain] {
        &self.lambda.domains
    }

    pub fn num_augmented_states(&self) -> usize {
        self.policy.len()
    }

    pub fn encode(&self, lambdas: &[usize]) -> usize {
        self.lambda.encode(lambdas)
    }

    pub fn decode(&self, combo: usize) -> Vec<usize> {
        self.lambda.decode(combo)
    }

    pub fn augmented_state(&self, h: usize, p: usize, combo: usize) -> AugmentedState {
        AugmentedState {
            h,
            p,
            lambdas: self.decode(combo),
        }
    }

    fn index(&self, h: usize, p: usize, combo: usize) -> usize {
        assert!(h <= self.horizon && p < self.num_product && combo < self.lambda.combos);
        (h * self.num_product + p) * self.lambda.combos + combo
    }

    pub fn value(&self, h: usize, p: usize, combo: usize, k: usize) -> f64 {
        self.values[self.index(h, p, combo) * self.num_objectives() + k]
    }

    pub fn values_at(&self, h: usize, p: usize, combo: usize) -> &[f64] {
        let k = self.num_objectives();
        let i = self.index(h, p, combo) * k;
        &self.values[i..i + k]
    }

    /// Value vector at `(H, initial product state, λ = 0)`.
    pub fn initial_values(&self) -> &[f64] {
        self.values_at(self.horizon, 0, 0)
    }

    /// `A_k*` as a bitmask over the positions of the product choices; zero
    /// on terminal states and at `h = 0`.
    pub fn action_mask(&self, h: usize, p: usize, combo: usize, k: usize) -> u64 {
        self.masks[self.index(h, p, combo) * self.num_objectives() + k]
    }

    pub fn action_set(&self, prod: &ProductSystem, h: usize, p: usize, combo: usize, k: usize) -> Vec<ActionId> {
        let m = self.action_mask(h, p, combo, k);
        prod.choices(p)
            .iter()
            .enumerate()
            .filter(|(ci, _)| m >> ci & 1 == 1)
            .map(|(_, c)| c.action)
            .collect()
    }

    pub fn action(&self, h: usize, p: usize, combo: usize) -> Option<ActionId> {
        match self.policy[self.index(h, p, combo)] {
            NO_ACTION => None,
            a => Some(ActionId(a as usize)),
        }
    }

    pub(crate) fn lambda_space(&self) -> &LambdaSpace {
        &self.lambda
    }

    pub(crate) fn from_parts(
        horizon: usize,
        c_fail: f64,
        epsilon: Epsilon,
        aggregations: Vec<Aggregation>,
        lambda: LambdaSpace,
        num_product: usize,
        (values, masks, policy): (Vec<f64>, Vec<u64>, Vec<u32>),
    ) -> Result<LexSolution> {
        let n = (horizon + 1) * num_product * lambda.combos;
        let k = aggregations.len();
        if values.len() != n * k || masks.len() != n * k || policy.len() != n {
            return Err(Error::InvalidModel(format!(
                "solution tables do not match {n} augmented states and {k} objectives"
            )));
        }
        Ok(LexSolution {
            horizon,
            c_fail,
            epsilon,
            aggregations,
            num_product,
            lambda,
            values,
            masks,
            policy,
            warnings: Vec::new(),
        })
    }

    #[cfg(test)]
    pub(crate) fn raw(&self) -> (&[f64], &[u64], &[u32]) {
        (&self.values, &self.masks, &self.policy)
    }

    /// Check nesting of the action sets, `ε`-consistency against freshly
    /// recomputed Q-values, and that the policy picks from `A_K*`.
    /// Returns one message per violation.
    pub fn verify(&self, prod: &ProductSystem, spec: &CostSpec) -> Vec<String> {
        let k = self.num_objectives();
        let sums: Vec<Option<CostTable>> = spec
            .objectives
            .iter()
            .map(|o| (o.aggregation == Aggregation::Sum).then(|| o.tabulate(prod.base())))
            .collect();
        let ctx = Ctx {
            prod,
            lambda: &self.lambda,
            sums: &sums,
            k,
            c_fail: self.c_fail,
            epsilon: self.epsilon,
        };
        let layer = self.num_product * self.lambda.combos * k;
        let mut errors = Vec::new();
        let mut q = Vec::new();
        for h in 1..=self.horizon {
            let prev = &self.values[(h - 1) * layer..h * layer];
            for p in 0..self.num_product {
                if prod.is_terminal(p) || prod.choices(p).is_empty() {
                    continue;
                }
                let n = prod.choices(p).len();
                let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
                for combo in 0..self.lambda.combos {
                    ctx.q_values(p, combo, prev, &mut q);
                    let mut outer = full;
                    let at = format!("(h={h}, {}, λ={:?})", prod.name(p), self.decode(combo));
                    for obj in 0..k {
                        let m = self.action_mask(h, p, combo, obj);
                        if m == 0 {
                            errors.push(format!("{at}: A_{obj} is empty"));
                        }
                        if m & !outer != 0 {
                            errors.push(format!("{at}: A_{obj} not nested in previous set"));
                        }
                        let best = (0..n)
                            .filter(|ci| outer >> ci & 1 == 1)
                            .map(|ci| q[ci * k + obj])
                            .fold(f64::INFINITY, f64::min);
                        let slack = self.epsilon.at(best);
                        for ci in (0..n).filter(|ci| m >> ci & 1 == 1) {
                            if q[ci * k + obj] > best + slack {
                                errors.push(format!("{at}: action position {ci} outside slack for objective {obj}"));
                            }
                        }
                        outer = m;
                    }
                    match self.action(h, p, combo) {
                        Some(a) => {
                            let pos = prod.choices(p).iter().position(|c| c.action == a);
                            if pos.is_none_or(|ci| outer >> ci & 1 == 0) {
                                errors.push(format!("{at}: policy action outside A_K*"));
                            }
                        }
                        None => errors.push(format!("{at}: no policy action")),
                    }
                }
            }
        }
        errors
    }
}

impl HorizonPolicy for LexSolution {
    type Memory = usize;

    fn start(&self, _: &ProductSystem) -> usize {
        0
    }

    fn advance(&self, prod: &ProductSystem, combo: &usize, p: usize, ci: usize, j: usize) -> usize {
        self.lambda.step(*combo, prod.state(p).s, ci, j)
    }

    fn distribution(&self, h: usize, p: usize, combo: &usize) -> Vec<(ActionId, f64)> {
        self.action(h, p, *combo)
            .map(|a| vec![(a, 1.0)])
            .unwrap_or_default()
    }
}
