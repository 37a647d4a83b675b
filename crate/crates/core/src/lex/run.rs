use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LexSolution;
use crate::mdp::{
    realized_costs, sample_trajectory_with, ActionId, CostSpec, DecisionAdapter, MaxRange, Policy, StateId,
    StepStatus, System,
};
use crate::product::ProductSystem;
use crate::Result;

/// Decision state of the solved policy during execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AugDecision {
    /// Steps remaining.
    pub h: usize,
    /// Product state index.
    pub p: usize,
    pub combo: usize,
}

/// Tracks `(h, q, λ)` alongside a run of the base system.
#[derive(Debug, Clone, Copy)]
pub struct LexAdapter<'a> {
    prod: &'a ProductSystem,
    sol: &'a LexSolution,
}

impl<'a> LexAdapter<'a> {
    pub fn new(prod: &'a ProductSystem, sol: &'a LexSolution) -> Self {
        LexAdapter { prod, sol }
    }
}

impl DecisionAdapter for LexAdapter<'_> {
    type Decision = AugDecision;

    fn start(&self, _: &System, _s0: StateId) -> AugDecision {
        AugDecision {
            h: self.sol.horizon(),
            p: self.prod.initial(),
            combo: 0,
        }
    }

    fn advance(&self, sys: &System, cur: &AugDecision, s: StateId, a: ActionId, next: StateId) -> AugDecision {
        let (ci, choice) = self
            .prod
            .choice(cur.p, a)
            .expect("simulator only advances on admissible actions");
        let j = sys.choices(s)[ci]
            .successors
            .iter()
            .position(|x| x.state == next)
            .expect("sampled successor");
        AugDecision {
            h: cur.h - 1,
            p: choice.successors[j],
            combo: self.sol.lambda_space().step(cur.combo, s, ci, j),
        }
    }

    fn status(&self, _: &System, d: &AugDecision, _: StateId) -> StepStatus {
        if self.prod.is_target(d.p) {
            StepStatus::Goal
        } else if self.prod.is_sink(d.p) || d.h == 0 || self.prod.choices(d.p).is_empty() {
            StepStatus::Stop
        } else {
            StepStatus::Continue
        }
    }
}

impl Policy<AugDecision> for LexSolution {
    fn distribution(&self, d: &AugDecision) -> Vec<(ActionId, f64)> {
        self.action(d.h, d.p, d.combo)
            .map(|a| vec![(a, 1.0)])
            .unwrap_or_default()
    }
}

/// One simulated execution of the solved policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    /// Automaton state after reading each visited state's label.
    pub automaton: Vec<usize>,
    /// Realized cost per objective over the whole run.
    pub costs: Vec<f64>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub runs: Vec<RunRecord>,
    /// Fraction of runs reaching a product target; `None` without runs.
    pub satisfaction_rate: Option<f64>,
    /// Mean realized cost per objective over the satisfied runs.
    pub mean_costs: Vec<Option<f64>>,
}

/// Simulate `n_samples` runs; run `i` uses seed `seed + i`.
pub fn run_policy(
    prod: &ProductSystem,
    spec: &CostSpec,
    sol: &LexSolution,
    seed: u64,
    n_samples: usize,
) -> Result<RunStats> {
    let sys = prod.base();
    let adapter = LexAdapter::new(prod, sol);
    let s0 = prod.state(prod.initial()).s;
    let mut runs = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let run_seed = seed.wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        let sampled = sample_trajectory_with(sys, sol, &adapter, s0, &mut rng, sol.horizon())?;
        let t = sampled.trajectory;
        runs.push(RunRecord {
            seed: run_seed,
            costs: realized_costs(&t.states, &t.actions, spec, MaxRange::AllTransitions),
            automaton: sampled.decisions.iter().map(|d| prod.state(d.p).q).collect(),
            satisfied: sampled.status == StepStatus::Goal,
            states: t.states,
            actions: t.actions,
        });
    }
    let done: Vec<&RunRecord> = runs.iter().filter(|r| r.satisfied).collect();
    let satisfaction_rate = (!runs.is_empty()).then(|| done.len() as f64 / runs.len() as f64);
    let mean_costs = (0..spec.len())
        .map(|k| (!done.is_empty()).then(|| done.iter().map(|r| r.costs[k]).sum::<f64>() / done.len() as f64))
        .collect();
    Ok(RunStats {
        runs,
        satisfaction_rate,
        mean_costs,
    })
}
