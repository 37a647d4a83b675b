//! Synchronous product of a transition system with a total DFA.
//!
//! A product state `(s, q)` moves under action `a` to `(s', δ(q, L(s')))`
//! with the base probability `P(s' | s, a)`. The automaton starts by
//! reading the initial label, so the initial product state is
//! `(s0, δ(q0, L(s0)))`. Only states reachable from there are kept;
//! terminal states (targets and rejecting-sink states) are not expanded.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::fltl::{Dfa, Letter};
use crate::mdp::{ActionId, DeterministicPolicy, StateId, System, SystemBuilder};
use crate::{Error, Result};

/// Which product states count as targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetRule {
    /// `(s, q)` with `q` accepting.
    #[default]
    Acceptance,
    /// `(s, q)` with `q` accepting and `s` a target of the base system;
    /// with the one-state `true` automaton this is the plain target set.
    AcceptanceAndBase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProductState {
    pub s: StateId,
    pub q: usize,
}

/// Product choice; `successors[j]` is the product image of the base
/// choice's `j`-th successor, so base cost tables index it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductChoice {
    pub action: ActionId,
    pub successors: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ProductSystem {
    base: System,
    dfa: Dfa,
    rule: TargetRule,
    letters: Vec<Letter>,
    states: Vec<ProductState>,
    index: HashMap<ProductState, usize>,
    choices: Vec<Vec<ProductChoice>>,
    targets: Vec<bool>,
    sinks: Vec<bool>,
}

pub fn build_product(sys: &System, dfa: &Dfa, s0: StateId, rule: TargetRule) -> Result<ProductSystem> {
    if !dfa.is_total() {
        return Err(Error::IncompleteAutomaton);
    }
    if s0.0 >= sys.num_states() {
        return Err(Error::UnknownState(s0.0));
    }
    let letters: Vec<Letter> = sys
        .states()
        .map(|s| Letter::from_props(dfa.ap(), sys.labels(s)))
        .collect();
    let step = |q: usize, s: StateId| dfa.step(q, letters[s.0]).expect("total automaton");

    let mut prod = ProductSystem {
        base: sys.clone(),
        dfa: dfa.clone(),
        rule,
        letters: letters.clone(),
        states: Vec::new(),
        index: HashMap::new(),
        choices: Vec::new(),
        targets: Vec::new(),
        sinks: Vec::new(),
    };
    let init = ProductState {
        s: s0,
        q: step(dfa.initial(), s0),
    };
    prod.intern(init);
    let mut queue = VecDeque::from([0usize]);
    while let Some(p) = queue.pop_front() {
        if prod.is_terminal(p) {
            continue;
        }
        let ProductState { s, q } = prod.states[p];
        let mut row = Vec::with_capacity(sys.choices(s).len());
        for choice in sys.choices(s) {
            let successors = choice
                .successors
                .iter()
                .map(|succ| {
                    let next = ProductState {
                        s: succ.state,
                        q: step(q, succ.state),
                    };
                    let before = prod.states.len();
                    let idx = prod.intern(next);
                    if idx == before {
                        queue.push_back(idx);
                    }
                    idx
                })
                .collect();
            row.push(ProductChoice {
                action: choice.action,
                successors,
            });
        }
        prod.choices[p] = row;
    }
    Ok(prod)
}

impl ProductSystem {
    fn intern(&mut self, x: ProductState) -> usize {
        if let Some(&i) = self.index.get(&x) {
            return i;
        }
        let i = self.states.len();
        let accepting = self.dfa.is_accepting(x.q);
        let target = match self.rule {
            TargetRule::Acceptance => accepting,
            TargetRule::AcceptanceAndBase => accepting && self.base.is_target(x.s),
        };
        self.states.push(x);
        self.index.insert(x, i);
        self.choices.push(Vec::new());
        self.targets.push(target);
        self.sinks.push(self.dfa.is_sink(x.q));
        i
    }

    pub fn base(&self) -> &System {
        &self.base
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn rule(&self) -> TargetRule {
        self.rule
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Index of the initial product state (always 0).
    pub fn initial(&self) -> usize {
        0
    }

    pub fn state(&self, p: usize) -> ProductState {
        self.states[p]
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn index_of(&self, x: ProductState) -> Option<usize> {
        self.index.get(&x).copied()
    }

    /// Empty for terminal states.
    pub fn choices(&self, p: usize) -> &[ProductChoice] {
        &self.choices[p]
    }

    pub fn choice(&self, p: usize, a: ActionId) -> Option<(usize, &ProductChoice)> {
        self.choices[p]
            .iter()
            .enumerate()
            .find(|(_, c)| c.action == a)
    }

    /// Probability of the `j`-th successor of choice `ci` at `p`.
    pub fn prob(&self, p: usize, ci: usize, j: usize) -> f64 {
        self.base.choices(self.states[p].s)[ci].successors[j].prob
    }

    pub fn is_target(&self, p: usize) -> bool {
        self.targets[p]
    }

    pub fn is_sink(&self, p: usize) -> bool {
        self.sinks[p]
    }

    pub fn is_terminal(&self, p: usize) -> bool {
        self.targets[p] || self.sinks[p]
    }

    pub fn letter(&self, s: StateId) -> Letter {
        self.letters[s.0]
    }

    /// Automaton state after reading `L(s)` from `q`.
    pub fn advance_automaton(&self, q: usize, s: StateId) -> usize {
        self.dfa.step(q, self.letters[s.0]).expect("total automaton")
    }

    pub fn name(&self, p: usize) -> String {
        let x = self.states[p];
        format!("{}@q{}", self.base.state_name(x.s), x.q)
    }

    /// Product states along a base run starting at the initial product
    /// state, cut at the first terminal state. `None` if the run leaves the
    /// stored product.
    pub fn lift(&self, states: &[StateId], actions: &[ActionId]) -> Option<Vec<usize>> {
        let mut p = self.initial();
        if states.first() != Some(&self.states[p].s) {
            return None;
        }
        let mut out = vec![p];
        for (a, next) in actions.iter().zip(&states[1..]) {
            if self.is_terminal(p) {
                break;
            }
            let (ci, choice) = self.choice(p, *a)?;
            let j = self.base.choices(self.states[p].s)[ci]
                .successors
                .iter()
                .position(|x| x.state == *next)?;
            p = choice.successors[j];
            out.push(p);
        }
        Some(out)
    }

    /// The product as a plain system with states named `s@q`.
    pub fn to_system(&self) -> System {
        let names: Vec<String> = (0..self.num_states()).map(|p| self.name(p)).collect();
        let mut b = SystemBuilder::new(names, self.base.action_names().to_vec());
        for p in 0..self.num_states() {
            for (ci, c) in self.choices[p].iter().enumerate() {
                b.admit(p, c.action.0);
                for (j, &to) in c.successors.iter().enumerate() {
                    b.transition(p, c.action.0, to, self.prob(p, ci, j));
                }
            }
            if self.targets[p] {
                b.target(p);
            }
            for l in self.base.labels(self.states[p].s) {
                b.label(p, l.clone());
            }
        }
        b.build()
    }
}

/// A policy on product states that may depend on the steps remaining and
/// on memory updated along the run.
pub trait HorizonPolicy {
    type Memory: Clone + Eq + Hash;

    fn start(&self, prod: &ProductSystem) -> Self::Memory;

    /// Memory after taking choice `ci` at `p` and landing on the `j`-th
    /// successor.
    fn advance(&self, prod: &ProductSystem, mem: &Self::Memory, p: usize, ci: usize, j: usize) -> Self::Memory;

    /// Action distribution at `p` with `h` steps remaining (`h ≥ 1`).
    fn distribution(&self, h: usize, p: usize, mem: &Self::Memory) -> Vec<(ActionId, f64)>;
}

/// Memoryless deterministic policy keyed by product state index.
impl HorizonPolicy for DeterministicPolicy<usize> {
    type Memory = ();

    fn start(&self, _: &ProductSystem) {}

    fn advance(&self, _: &ProductSystem, _: &(), _: usize, _: usize, _: usize) {}

    fn distribution(&self, _h: usize, p: usize, _: &()) -> Vec<(ActionId, f64)> {
        self.get(&p).map(|a| vec![(a, 1.0)]).unwrap_or_default()
    }
}

/// Exact probability of entering a product target within `horizon` steps
/// from the initial state. Mass is pushed forward layer by layer.
pub fn satisfaction_probability<P: HorizonPolicy>(
    prod: &ProductSystem,
    policy: &P,
    horizon: usize,
) -> Result<f64> {
    let mut layer: HashMap<(usize, P::Memory), f64> = HashMap::new();
    layer.insert((prod.initial(), policy.start(prod)), 1.0);
    let mut reached = 0.0;
    for h in (0..=horizon).rev() {
        let mut next: HashMap<(usize, P::Memory), f64> = HashMap::new();
        for ((p, mem), mass) in layer {
            if prod.is_target(p) {
                reached += mass;
                continue;
            }
            if prod.is_sink(p) || h == 0 || prod.choices(p).is_empty() {
                continue;
            }
            for (a, pa) in policy.distribution(h, p, &mem) {
                if pa == 0.0 {
                    continue;
                }
                let (ci, choice) = prod.choice(p, a).ok_or_else(|| {
                    Error::InvalidPolicy(format!("action {} not admissible at {}", a.0, prod.name(p)))
                })?;
                for (j, &to) in choice.successors.iter().enumerate() {
                    let m = policy.advance(prod, &mem, p, ci, j);
                    *next.entry((to, m)).or_insert(0.0) += mass * pa * prod.prob(p, ci, j);
                }
            }
        }
        layer = next;
    }
    Ok(reached)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fltl::{add_rejecting_sink, minimize_dfa, parse_fltl, to_dfa, Formula};
    use crate::mdp::{sample_trajectory, PlainStates, StochasticPolicy};
    use proptest::prelude::*;

    fn top(ap: &[&str]) -> Dfa {
        let ap: Vec<String> = ap.iter().map(|s| s.to_string()).collect();
        to_dfa(&Formula::True, &ap).unwrap()
    }

    fn path(n: usize) -> System {
        let mut b = SystemBuilder::with_counts(n + 1, 1);
        for i in 0..n {
            b.transition(i, 0, i + 1, 1.0);
        }
        b.target(n);
        b.build()
    }

    fn always_first() -> DeterministicPolicy<usize> {
        (0..64).map(|p| (p, ActionId(0))).collect()
    }

    #[test]
    fn path_of_three_needs_three_steps() {
        let sys = path(3);
        let prod = build_product(&sys, &top(&[]), StateId(0), TargetRule::AcceptanceAndBase).unwrap();
        assert_eq!(prod.num_states(), 4);
        assert_eq!(satisfaction_probability(&prod, &always_first(), 3).unwrap(), 1.0);
        assert_eq!(satisfaction_probability(&prod, &always_first(), 2).unwrap(), 0.0);
    }

    #[test]
    fn trivial_automaton_mirrors_base() {
        let mut b = SystemBuilder::with_counts(4, 2);
        b.transition(0, 0, 1, 0.5).transition(0, 0, 2, 0.5);
        b.transition(0, 1, 0, 1.0);
        b.transition(1, 0, 2, 1.0);
        b.transition(3, 0, 3, 1.0);
        b.target(2);
        let sys = b.build();
        let prod = build_product(&sys, &top(&["p"]), StateId(0), TargetRule::AcceptanceAndBase).unwrap();
        // State 3 is unreachable from 0.
        assert_eq!(prod.num_states(), 3);
        for p in 0..prod.num_states() {
            let x = prod.state(p);
            assert_eq!(prod.is_target(p), sys.is_target(x.s));
        }
    }

    #[test]
    fn incomplete_automaton_rejected() {
        let ap = vec!["p".to_string()];
        let d = Dfa::new(ap, 0, vec![vec![Some(0), None]], vec![true], None).unwrap();
        let err = build_product(&path(1), &d, StateId(0), TargetRule::Acceptance).unwrap_err();
        assert!(matches!(err, Error::IncompleteAutomaton));
        let fixed = add_rejecting_sink(&d, false);
        assert!(build_product(&path(1), &fixed, StateId(0), TargetRule::Acceptance).is_ok());
    }

    #[test]
    fn initial_label_is_read() {
        let ap = vec!["p".to_string()];
        let d = to_dfa(&parse_fltl("p", &ap).unwrap(), &ap).unwrap();
        let mut b = SystemBuilder::with_counts(2, 1);
        b.transition(0, 0, 1, 1.0).label(0, "p");
        let prod = build_product(&b.build(), &d, StateId(0), TargetRule::Acceptance).unwrap();
        assert!(prod.is_target(prod.initial()));
        assert_eq!(prod.num_states(), 1);
    }

    #[test]
    fn sink_states_are_kept_and_marked() {
        let ap = vec!["bad".to_string(), "goal".to_string()];
        let d = minimize_dfa(&to_dfa(&parse_fltl("!bad U goal", &ap).unwrap(), &ap).unwrap()).unwrap();
        let mut b = SystemBuilder::with_counts(3, 1);
        b.transition(0, 0, 1, 0.25).transition(0, 0, 2, 0.75);
        b.label(1, "bad").label(2, "goal");
        let prod = build_product(&b.build(), &d, StateId(0), TargetRule::Acceptance).unwrap();
        assert_eq!(prod.num_states(), 3);
        let bad = prod.index_of(ProductState { s: StateId(1), q: d.sink().unwrap() }).unwrap();
        assert!(prod.is_sink(bad));
        assert!(prod.choices(bad).is_empty());
        let p = satisfaction_probability(&prod, &always_first(), 5).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    /// Random base system with labels over two propositions.
    fn system_strategy() -> impl Strategy<Value = System> {
        (2usize..6).prop_flat_map(|n| {
            let rows = prop::collection::vec(
                prop::collection::vec((0..n, prop::collection::vec((0..n, 1u32..4), 1..4)), 1..3),
                n,
            );
            let labels = prop::collection::vec(0u32..4, n);
            (Just(n), rows, labels)
        })
        .prop_map(|(n, rows, labels)| {
            let mut b = SystemBuilder::with_counts(n, 3);
            for (s, row) in rows.into_iter().enumerate() {
                for (a, (_, succ)) in row.into_iter().enumerate() {
                    let total: u32 = succ.iter().map(|x| x.1).sum();
                    for (to, w) in succ {
                        b.transition(s, a, to, w as f64 / total as f64);
                    }
                }
            }
            for (s, l) in labels.into_iter().enumerate() {
                if l & 1 == 1 {
                    b.label(s, "p");
                }
                if l & 2 == 2 {
                    b.label(s, "q");
                }
            }
            b.build()
        })
    }

    fn automaton() -> Dfa {
        let ap = vec!["p".to_string(), "q".to_string()];
        minimize_dfa(&to_dfa(&parse_fltl("!q U (p & X F q)", &ap).unwrap(), &ap).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn mass_and_structure_follow_base(sys in system_strategy()) {
            let d = automaton();
            let prod = build_product(&sys, &d, StateId(0), TargetRule::Acceptance).unwrap();
            for p in 0..prod.num_states() {
                let x = prod.state(p);
                for (ci, c) in prod.choices(p).iter().enumerate() {
                    let base = &sys.choices(x.s)[ci];
                    prop_assert_eq!(base.action, c.action);
                    let mut mass = 0.0;
                    for (j, &to) in c.successors.iter().enumerate() {
                        let y = prod.state(to);
                        prop_assert_eq!(y.s, base.successors[j].state);
                        prop_assert_eq!(Some(y.q), d.step(x.q, prod.letter(y.s)));
                        mass += prod.prob(p, ci, j);
                    }
                    prop_assert_eq!(mass, base.total_mass());
                }
            }
        }

        #[test]
        fn satisfaction_monotone_in_horizon(sys in system_strategy()) {
            let prod = build_product(&sys, &automaton(), StateId(0), TargetRule::Acceptance).unwrap();
            let pol = always_first();
            let mut last = 0.0;
            for h in 0..12 {
                let v = satisfaction_probability(&prod, &pol, h).unwrap();
                prop_assert!(v >= last - 1e-15 && v <= 1.0 + 1e-12);
                last = v;
            }
        }

        #[test]
        fn co_simulation_matches_automaton_run(sys in system_strategy(), seed in any::<u64>()) {
            let d = automaton();
            let prod = build_product(&sys, &d, StateId(0), TargetRule::Acceptance).unwrap();
            let pol = StochasticPolicy::uniform(&sys);
            let traj = sample_trajectory(&sys, &pol, &PlainStates, StateId(0), seed, 15).unwrap();
            let lifted = prod.lift(&traj.states, &traj.actions).unwrap();
            let mut q = d.initial();
            for (t, s) in traj.states.iter().enumerate().take(lifted.len()) {
                q = d.step(q, prod.letter(*s)).unwrap();
                prop_assert_eq!(prod.state(lifted[t]).q, q);
                prop_assert_eq!(prod.is_target(lifted[t]), d.is_accepting(q));
            }
        }
    }

    #[test]
    fn satisfaction_matches_enumeration() {
        // Three-state loop with a coin flip; enumerate every path of
        // length ≤ H by hand-rolled DFS.
        let mut b = SystemBuilder::with_counts(3, 1);
        b.transition(0, 0, 1, 0.5).transition(0, 0, 0, 0.5);
        b.transition(1, 0, 2, 0.25).transition(1, 0, 0, 0.75);
        b.target(2);
        let sys = b.build();
        let prod = build_product(&sys, &top(&[]), StateId(0), TargetRule::AcceptanceAndBase).unwrap();
        fn enumerate(sys: &System, s: usize, h: usize) -> f64 {
            if sys.is_target(StateId(s)) {
                return 1.0;
            }
            if h == 0 {
                return 0.0;
            }
            sys.choices(StateId(s))[0]
                .successors
                .iter()
                .map(|x| x.prob * enumerate(sys, x.state.0, h - 1))
                .sum()
        }
        for h in 0..10 {
            let v = satisfaction_probability(&prod, &always_first(), h).unwrap();
            assert!((v - enumerate(&sys, 0, h)).abs() < 1e-12, "h = {h}");
        }
    }

    #[test]
    fn system_view_uses_pair_names() {
        let sys = path(2);
        let prod = build_product(&sys, &top(&[]), StateId(0), TargetRule::AcceptanceAndBase).unwrap();
        let view = prod.to_system();
        assert_eq!(view.state_names(), &["s0@q0", "s1@q0", "s2@q0"]);
        assert!(view.is_target(StateId(2)));
    }
}
