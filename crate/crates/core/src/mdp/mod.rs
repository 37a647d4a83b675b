//! Finite stochastic transition systems with target sets and labels.
//!
//! Transitions are stored sparsely: each state owns a list of [`Choice`]s,
//! one per admissible action, and each choice lists its successors with
//! their probabilities. A [`System`] can hold malformed data (mass not
//! summing to one, dangling indices); [`validate_system`] reports those as
//! diagnostics instead of refusing to construct the value.

mod cost;
mod policy;
mod simulate;
mod sum;
mod trajectory;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use cost::{Aggregation, CostSpec, CostTable, Objective};
pub use policy::{DeterministicPolicy, Policy, StochasticPolicy};
pub use simulate::{
    expected_cost_monte_carlo, sample_trajectory, sample_trajectory_with, DecisionAdapter,
    McEstimate, PlainStates, Sampled, StepStatus,
};
pub use sum::{greedy_sum_policy, value_iterate_sum, SumSolve};
pub use trajectory::{
    evaluate_trajectory_costs, realized_costs, trajectory_probability, MaxRange, Trajectory,
};

/// Tolerance on the total outgoing probability of a state-action pair.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Successor {
    pub state: StateId,
    pub prob: f64,
}

/// One admissible action of a state together with its successor distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: ActionId,
    pub successors: Vec<Successor>,
}

impl Choice {
    pub fn total_mass(&self) -> f64 {
        self.successors.iter().map(|s| s.prob).sum()
    }

    pub fn prob_to(&self, next: StateId) -> f64 {
        self.successors
            .iter()
            .filter(|s| s.state == next)
            .map(|s| s.prob)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct System {
    state_names: Vec<String>,
    action_names: Vec<String>,
    choices: Vec<Vec<Choice>>,
    targets: Vec<bool>,
    labels: Vec<Vec<String>>,
    state_index: HashMap<String, StateId>,
    action_index: HashMap<String, ActionId>,
    orphan_sources: Vec<usize>,
}

impl System {
    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a.0]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_index.get(name).copied()
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.action_index.get(name).copied()
    }

    /// Choices of `s`, sorted by action index.
    pub fn choices(&self, s: StateId) -> &[Choice] {
        &self.choices[s.0]
    }

    pub fn choice(&self, s: StateId, a: ActionId) -> Option<&Choice> {
        self.choices
            .get(s.0)?
            .binary_search_by_key(&a, |c| c.action)
            .ok()
            .map(|i| &self.choices[s.0][i])
    }

    pub fn admissible(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.choices[s.0].iter().map(|c| c.action)
    }

    pub fn is_admissible(&self, s: StateId, a: ActionId) -> bool {
        self.choice(s, a).is_some()
    }

    /// `P(next | s, a)`, zero for missing entries.
    pub fn prob(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.choice(s, a).map_or(0.0, |c| c.prob_to(next))
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets[s.0]
    }

    pub fn targets(&self) -> impl Iterator<Item = StateId> + '_ {
        self.targets
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .map(|(i, _)| StateId(i))
    }

    /// Propositions holding in `s`, sorted.
    pub fn labels(&self, s: StateId) -> &[String] {
        &self.labels[s.0]
    }

    /// Copy of the system with every choice's successor mass scaled to one.
    ///
    /// Never applied implicitly; callers opt in.
    pub fn renormalized(&self) -> System {
        let mut out = self.clone();
        for choice in out.choices.iter_mut().flatten() {
            let total = choice.total_mass();
            if total > 0.0 {
                for succ in &mut choice.successors {
                    succ.prob /= total;
                }
            }
        }
        out
    }

    /// Longest state name, for table formatting.
    pub(crate) fn max_state_name_len(&self) -> usize {
        self.state_names.iter().map(|n| n.len()).max().unwrap_or(0)
    }
}

/// Incremental construction of a [`System`]. No validation happens here.
#[derive(Debug, Clone)]
pub struct SystemBuilder {
    state_names: Vec<String>,
    action_names: Vec<String>,
    choices: Vec<Vec<Choice>>,
    targets: Vec<bool>,
    labels: Vec<Vec<String>>,
}

impl SystemBuilder {
    pub fn new<S: Into<String>, A: Into<String>>(
        states: impl IntoIterator<Item = S>,
        actions: impl IntoIterator<Item = A>,
    ) -> Self {
        let state_names: Vec<String> = states.into_iter().map(Into::into).collect();
        let action_names: Vec<String> = actions.into_iter().map(Into::into).collect();
        let n = state_names.len();
        SystemBuilder {
            state_names,
            action_names,
            choices: vec![Vec::new(); n],
            targets: vec![false; n],
            labels: vec![Vec::new(); n],
        }
    }

    /// Builder with states named `s0..s{n-1}` and actions `a0..a{m-1}`.
    pub fn with_counts(states: usize, actions: usize) -> Self {
        Self::new(
            (0..states).map(|i| format!("s{i}")),
            (0..actions).map(|i| format!("a{i}")),
        )
    }

    /// Declare `a` admissible in `s` without successors yet.
    pub fn admit(&mut self, s: usize, a: usize) -> &mut Self {
        self.choice_mut(s, a);
        self
    }

    pub fn transition(&mut self, s: usize, a: usize, next: usize, prob: f64) -> &mut Self {
        self.choice_mut(s, a).successors.push(Successor {
            state: StateId(next),
            prob,
        });
        self
    }

    pub fn target(&mut self, s: usize) -> &mut Self {
        if let Some(t) = self.targets.get_mut(s) {
            *t = true;
        }
        self
    }

    pub fn label(&mut self, s: usize, prop: impl Into<String>) -> &mut Self {
        if let Some(l) = self.labels.get_mut(s) {
            l.push(prop.into());
        }
        self
    }

    fn choice_mut(&mut self, s: usize, a: usize) -> &mut Choice {
        if s >= self.choices.len() {
            // Keep out-of-range sources around so validation can report them.
            self.choices.resize(s + 1, Vec::new());
        }
        let list = &mut self.choices[s];
        let pos = match list.binary_search_by_key(&ActionId(a), |c| c.action) {
            Ok(i) => i,
            Err(i) => {
                list.insert(
                    i,
                    Choice {
                        action: ActionId(a),
                        successors: Vec::new(),
                    },
                );
                i
            }
        };
        &mut list[pos]
    }

    pub fn build(mut self) -> System {
        for l in &mut self.labels {
            l.sort();
            l.dedup();
        }
        let state_index = self
            .state_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), StateId(i)))
            .collect();
        let action_index = self
            .action_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), ActionId(i)))
            .collect();
        // Rows for out-of-range source states are kept aside so that
        // validation can still report them.
        let n = self.state_names.len();
        let orphan_sources: Vec<usize> = (n..self.choices.len())
            .filter(|&i| !self.choices[i].is_empty())
            .collect();
        self.choices.truncate(n);
        let mut system = System {
            state_names: self.state_names,
            action_names: self.action_names,
            choices: self.choices,
            targets: self.targets,
            labels: self.labels,
            state_index,
            action_index,
            orphan_sources,
        };
        system.choices.resize(n, Vec::new());
        system
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiagnosticKind {
    EmptyStateSet,
    EmptyTargetSet,
    NoAdmissibleActions { state: StateId },
    ProbabilityMass { state: StateId, action: ActionId, total: f64 },
    ProbabilityOutOfRange { state: StateId, action: ActionId, to: StateId, prob: f64 },
    SourceOutOfRange { state: StateId },
    SuccessorOutOfRange { state: StateId, action: ActionId, to: StateId },
    ActionOutOfRange { state: StateId, action: ActionId },
    DuplicateSuccessor { state: StateId, action: ActionId, to: StateId },
    DuplicateName { name: String },
    NonPositiveCost {
        objective: usize,
        state: StateId,
        action: ActionId,
        to: StateId,
        cost: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Check every structural invariant of `sys`; an empty list means valid.
pub fn validate_system(sys: &System) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n = sys.num_states();
    let m = sys.num_actions();
    let sname = |s: StateId| -> String {
        sys.state_names
            .get(s.0)
            .cloned()
            .unwrap_or_else(|| format!("<state {}>", s.0))
    };
    let aname = |a: ActionId| -> String {
        sys.action_names
            .get(a.0)
            .cloned()
            .unwrap_or_else(|| format!("<action {}>", a.0))
    };
    let mut push = |kind: DiagnosticKind, message: String| out.push(Diagnostic { kind, message });

    if n == 0 {
        push(DiagnosticKind::EmptyStateSet, "empty state set".into());
    }
    for &src in &sys.orphan_sources {
        push(
            DiagnosticKind::SourceOutOfRange { state: StateId(src) },
            format!("transition source index {src} out of range"),
        );
    }
    if !sys.targets.iter().any(|t| *t) {
        push(DiagnosticKind::EmptyTargetSet, "empty target set".into());
    }
    for (names, what) in [(&sys.state_names, "state"), (&sys.action_names, "action")] {
        let mut seen = std::collections::HashSet::new();
        for name in names {
            if !seen.insert(name) {
                push(
                    DiagnosticKind::DuplicateName { name: name.clone() },
                    format!("duplicate {what} name `{name}`"),
                );
            }
        }
    }
    for s in sys.states() {
        let choices = sys.choices(s);
        if choices.is_empty() {
            push(
                DiagnosticKind::NoAdmissibleActions { state: s },
                format!("state {}: no admissible actions", sname(s)),
            );
        }
        for choice in choices {
            let a = choice.action;
            if a.0 >= m {
                push(
                    DiagnosticKind::ActionOutOfRange { state: s, action: a },
                    format!("state {}: action index {} out of range", sname(s), a.0),
                );
            }
            let mut seen = std::collections::HashSet::new();
            for succ in &choice.successors {
                if succ.state.0 >= n {
                    push(
                        DiagnosticKind::SuccessorOutOfRange {
                            state: s,
                            action: a,
                            to: succ.state,
                        },
                        format!(
                            "({}, {}): successor index {} out of range",
                            sname(s),
                            aname(a),
                            succ.state.0
                        ),
                    );
                }
                if !(succ.prob > 0.0 && succ.prob <= 1.0) {
                    push(
                        DiagnosticKind::ProbabilityOutOfRange {
                            state: s,
                            action: a,
                            to: succ.state,
                            prob: succ.prob,
                        },
                        format!(
                            "({}, {}) -> {}: probability {} outside (0, 1]",
                            sname(s),
                            aname(a),
                            sname(succ.state),
                            succ.prob
                        ),
                    );
                }
                if !seen.insert(succ.state) {
                    push(
                        DiagnosticKind::DuplicateSuccessor {
                            state: s,
                            action: a,
                            to: succ.state,
                        },
                        format!(
                            "({}, {}): successor {} listed twice",
                            sname(s),
                            aname(a),
                            sname(succ.state)
                        ),
                    );
                }
            }
            let total = choice.total_mass();
            if (total - 1.0).abs() > MASS_TOLERANCE {
                push(
                    DiagnosticKind::ProbabilityMass {
                        state: s,
                        action: a,
                        total,
                    },
                    format!(
                        "({}, {}): probability mass {} != 1",
                        sname(s),
                        aname(a),
                        total
                    ),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> SystemBuilder {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 1.0).transition(1, 0, 1, 1.0).target(1);
        b
    }

    #[test]
    fn valid_two_state_chain() {
        assert!(validate_system(&chain().build()).is_empty());
    }

    #[test]
    fn short_mass_is_reported() {
        let mut b = SystemBuilder::with_counts(3, 1);
        b.transition(0, 0, 1, 0.5)
            .transition(0, 0, 2, 0.4)
            .transition(1, 0, 1, 1.0)
            .transition(2, 0, 2, 1.0)
            .target(2);
        let diags = validate_system(&b.build());
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert!(matches!(
            diags[0].kind,
            DiagnosticKind::ProbabilityMass { state: StateId(0), .. }
        ));
        assert!(diags[0].message.contains("s0"));
    }

    #[test]
    fn empty_targets_are_reported() {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 1.0).transition(1, 0, 1, 1.0);
        let diags = validate_system(&b.build());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::EmptyTargetSet);
    }

    #[test]
    fn dangling_indices_are_reported() {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 5, 1.0).transition(1, 3, 1, 1.0).target(1);
        let kinds: Vec<_> = validate_system(&b.build()).into_iter().map(|d| d.kind).collect();
        assert!(kinds.iter().any(|k| matches!(k, DiagnosticKind::SuccessorOutOfRange { .. })));
        assert!(kinds.iter().any(|k| matches!(k, DiagnosticKind::ActionOutOfRange { .. })));
    }

    #[test]
    fn missing_actions_are_reported() {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 1.0).target(1);
        let diags = validate_system(&b.build());
        assert!(matches!(
            diags[0].kind,
            DiagnosticKind::NoAdmissibleActions { state: StateId(1) }
        ));
    }

    #[test]
    fn renormalize_only_on_request() {
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 0.45).transition(0, 0, 0, 0.45);
        b.transition(1, 0, 1, 1.0).target(1);
        let sys = b.build();
        assert_eq!(validate_system(&sys).len(), 1);
        let fixed = sys.renormalized();
        assert!(validate_system(&fixed).is_empty());
        assert!((fixed.prob(StateId(0), ActionId(0), StateId(1)) - 0.5).abs() < 1e-15);
    }
}
