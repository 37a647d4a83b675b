use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use super::{ActionId, StateId, System, MASS_TOLERANCE};
use crate::{Error, Result};

/// A (possibly randomized) decision rule over some decision-state type `D`.
///
/// `D` is a plain [`StateId`] for ordinary policies and an augmented state
/// for history-dependent ones; see [`super::DecisionAdapter`].
pub trait Policy<D> {
    /// Action distribution at `decision`. An empty vector means the policy
    /// is undefined there.
    fn distribution(&self, decision: &D) -> Vec<(ActionId, f64)>;

    fn probability(&self, decision: &D, action: ActionId) -> f64 {
        self.distribution(decision)
            .into_iter()
            .filter(|(a, _)| *a == action)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Tabular randomized policy `π(a | d)`.
#[derive(Debug, Clone)]
pub struct StochasticPolicy<D: Eq + Hash> {
    probs: HashMap<D, Vec<(ActionId, f64)>>,
}

impl<D: Eq + Hash> Default for StochasticPolicy<D> {
    fn default() -> Self {
        StochasticPolicy {
            probs: HashMap::new(),
        }
    }
}

impl<D: Eq + Hash + Debug> StochasticPolicy<D> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set the distribution at `decision`. Rejects probabilities outside
    /// `[0, 1]` and totals away from one by more than `1e-12`.
    pub fn set(&mut self, decision: D, dist: Vec<(ActionId, f64)>) -> Result<&mut Self> {
        if let Some((a, p)) = dist.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidPolicy(format!(
                "probability {p} of action {a} at {decision:?} outside [0, 1]"
            )));
        }
        let total: f64 = dist.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidPolicy(format!(
                "mass {total} at {decision:?} does not sum to 1"
            )));
        }
        self.probs.insert(decision, dist);
        Ok(self)
    }

    pub fn deterministic(mut self, decision: D, action: ActionId) -> Self {
        self.probs.insert(decision, vec![(action, 1.0)]);
        self
    }

    pub fn decisions(&self) -> impl Iterator<Item = &D> {
        self.probs.keys()
    }
}

impl StochasticPolicy<StateId> {
    /// Uniform over the admissible actions of every state.
    pub fn uniform(sys: &System) -> Self {
        let mut probs = HashMap::new();
        for s in sys.states() {
            let n = sys.choices(s).len();
            if n > 0 {
                let p = 1.0 / n as f64;
                probs.insert(s, sys.admissible(s).map(|a| (a, p)).collect());
            }
        }
        StochasticPolicy { probs }
    }

    /// Zero mass on inadmissible actions, for every state the policy covers.
    pub fn check_admissible(&self, sys: &System) -> Result<()> {
        for (s, dist) in &self.probs {
            if s.0 >= sys.num_states() {
                return Err(Error::UnknownState(s.0));
            }
            for (a, p) in dist {
                if *p > 0.0 && !sys.is_admissible(*s, *a) {
                    return Err(Error::InvalidPolicy(format!(
                        "mass {p} on inadmissible action {} at {}",
                        a.0,
                        sys.state_name(*s)
                    )));
                }
            }
        }
        Ok(())
    }
}

impl<D: Eq + Hash> Policy<D> for StochasticPolicy<D> {
    fn distribution(&self, decision: &D) -> Vec<(ActionId, f64)> {
        self.probs.get(decision).cloned().unwrap_or_default()
    }
}

/// Deterministic tabular policy.
#[derive(Debug, Clone)]
pub struct DeterministicPolicy<D: Eq + Hash> {
    actions: HashMap<D, ActionId>,
}

impl<D: Eq + Hash> Default for DeterministicPolicy<D> {
    fn default() -> Self {
        DeterministicPolicy {
            actions: HashMap::new(),
        }
    }
}

impl<D: Eq + Hash> DeterministicPolicy<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, decision: D, action: ActionId) {
        self.actions.insert(decision, action);
    }

    pub fn get(&self, decision: &D) -> Option<ActionId> {
        self.actions.get(decision).copied()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

impl<D: Eq + Hash> FromIterator<(D, ActionId)> for DeterministicPolicy<D> {
    fn from_iter<I: IntoIterator<Item = (D, ActionId)>>(iter: I) -> Self {
        DeterministicPolicy {
            actions: iter.into_iter().collect(),
        }
    }
}

impl<D: Eq + Hash> Policy<D> for DeterministicPolicy<D> {
    fn distribution(&self, decision: &D) -> Vec<(ActionId, f64)> {
        self.get(decision).map(|a| vec![(a, 1.0)]).unwrap_or_default()
    }
}
