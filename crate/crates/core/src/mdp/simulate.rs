use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trajectory::realized_costs;
use super::{ActionId, CostSpec, MaxRange, Policy, StateId, System, Trajectory};
use crate::{Error, Result};

/// What the simulator should do at the current decision state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Continue,
    /// Terminated in the goal region; the step index becomes the hitting time.
    Goal,
    /// Terminated without reaching the goal (failure, sink, horizon).
    Stop,
}

/// Maps the run history onto the decision state a policy is queried with.
///
/// The simulator only moves the base system; an adapter tracks whatever
/// extra memory (running maxima, automaton state, steps left) the policy
/// conditions on, and decides when the run is over.
pub trait DecisionAdapter {
    type Decision: Clone + Debug;

    fn start(&self, sys: &System, s0: StateId) -> Self::Decision;

    fn advance(
        &self,
        sys: &System,
        current: &Self::Decision,
        s: StateId,
        a: ActionId,
        next: StateId,
    ) -> Self::Decision;

    fn status(&self, sys: &System, _decision: &Self::Decision, s: StateId) -> StepStatus {
        if sys.is_target(s) {
            StepStatus::Goal
        } else {
            StepStatus::Continue
        }
    }
}

/// Decision state = current system state.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlainStates;

impl DecisionAdapter for PlainStates {
    type Decision = StateId;

    fn start(&self, _sys: &System, s0: StateId) -> StateId {
        s0
    }

    fn advance(&self, _: &System, _: &StateId, _: StateId, _: ActionId, next: StateId) -> StateId {
        next
    }
}

/// A sampled run together with the decision states it visited.
#[derive(Debug, Clone)]
pub struct Sampled<D> {
    pub trajectory: Trajectory,
    pub decisions: Vec<D>,
    pub status: StepStatus,
}

/// Sample one run of at most `step_cap` steps from `s0`, seeded.
pub fn sample_trajectory<P, A>(
    sys: &System,
    policy: &P,
    adapter: &A,
    s0: StateId,
    seed: u64,
    step_cap: usize,
) -> Result<Trajectory>
where
    A: DecisionAdapter,
    P: Policy<A::Decision>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_trajectory_with(sys, policy, adapter, s0, &mut rng, step_cap).map(|s| s.trajectory)
}

pub fn sample_trajectory_with<P, A, R>(
    sys: &System,
    policy: &P,
    adapter: &A,
    s0: StateId,
    rng: &mut R,
    step_cap: usize,
) -> Result<Sampled<A::Decision>>
where
    A: DecisionAdapter,
    P: Policy<A::Decision>,
    R: Rng + ?Sized,
{
    if s0.0 >= sys.num_states() {
        return Err(Error::UnknownState(s0.0));
    }
    let mut traj = Trajectory::start(s0);
    let mut decision = adapter.start(sys, s0);
    let mut decisions = vec![decision.clone()];
    let mut s = s0;
    let status = loop {
        match adapter.status(sys, &decision, s) {
            StepStatus::Goal => {
                traj.hitting_time = Some(traj.actions.len());
                break StepStatus::Goal;
            }
            StepStatus::Stop => break StepStatus::Stop,
            StepStatus::Continue if traj.actions.len() >= step_cap => break StepStatus::Stop,
            StepStatus::Continue => {}
        }
        let dist = policy.distribution(&decision);
        let a = sample_weighted(rng, dist.iter().map(|(a, p)| (*a, *p)))
            .ok_or_else(|| Error::ZeroPolicyMass(format!("{decision:?}")))?;
        let choice = sys.choice(s, a).ok_or_else(|| {
            Error::InvalidPolicy(format!(
                "action {} chosen at {} is not admissible",
                a.0,
                sys.state_name(s)
            ))
        })?;
        let next = sample_weighted(rng, choice.successors.iter().map(|x| (x.state, x.prob)))
            .ok_or_else(|| {
                Error::InvalidModel(format!(
                    "({}, {}) has no successors",
                    sys.state_name(s),
                    sys.action_name(a)
                ))
            })?;
        decision = adapter.advance(sys, &decision, s, a, next);
        decisions.push(decision.clone());
        traj.actions.push(a);
        traj.states.push(next);
        s = next;
    };
    Ok(Sampled {
        trajectory: traj,
        decisions,
        status,
    })
}

fn sample_weighted<T: Copy, R: Rng + ?Sized>(
    rng: &mut R,
    items: impl Iterator<Item = (T, f64)> + Clone,
) -> Option<T> {
    let total: f64 = items.clone().map(|(_, w)| w).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (item, w) in items {
        if w <= 0.0 {
            continue;
        }
        last = Some(item);
        if u < w {
            return Some(item);
        }
        u -= w;
    }
    last
}

/// Monte-Carlo estimate of the per-objective expected costs.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub n_samples: usize,
    pub n_completed: usize,
    pub completion_rate: f64,
    /// `None` when no sample reached the target.
    pub means: Vec<Option<f64>>,
    pub std_errors: Vec<Option<f64>>,
}

/// Sample `n_samples` runs (one RNG stream seeded with `seed`) and average
/// the realized costs over the runs that reached the target.
#[allow(clippy::too_many_arguments)]
pub fn expected_cost_monte_carlo<P, A>(
    sys: &System,
    policy: &P,
    adapter: &A,
    s0: StateId,
    spec: &CostSpec,
    n_samples: usize,
    seed: u64,
    step_cap: usize,
) -> Result<McEstimate>
where
    A: DecisionAdapter,
    P: Policy<A::Decision>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); k];
    for _ in 0..n_samples {
        let run = sample_trajectory_with(sys, policy, adapter, s0, &mut rng, step_cap)?;
        if let Some(tau) = run.trajectory.hitting_time {
            let costs = realized_costs(
                &run.trajectory.states[..=tau],
                &run.trajectory.actions[..tau],
                spec,
                MaxRange::AllTransitions,
            );
            for (bucket, c) in samples.iter_mut().zip(costs) {
                bucket.push(c);
            }
        }
    }
    let n_completed = samples.first().map_or(0, Vec::len);
    let (means, std_errors) = samples
        .iter()
        .map(|xs| match xs.len() {
            0 => (None, None),
            n => {
                let mean = xs.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (Some(mean), Some((var / n as f64).sqrt()))
            }
        })
        .unzip();
    Ok(McEstimate {
        n_samples,
        n_completed,
        completion_rate: if n_samples == 0 {
            0.0
        } else {
            n_completed as f64 / n_samples as f64
        },
        means,
        std_errors,
    })
}
