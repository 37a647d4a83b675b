use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Most propositions an alphabet may range over (`2^16` letters).
pub const MAX_AP: usize = 16;

/// A letter of `2^AP`, as a bitset over the declared proposition order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Letter(pub u32);

impl Letter {
    pub fn contains(self, prop: usize) -> bool {
        self.0 >> prop & 1 == 1
    }

    /// Letter holding exactly the named propositions; names outside `ap`
    /// are ignored.
    pub fn from_props<S: AsRef<str>>(ap: &[String], props: &[S]) -> Letter {
        let mut bits = 0;
        for p in props {
            if let Some(i) = ap.iter().position(|a| a == p.as_ref()) {
                bits |= 1 << i;
            }
        }
        Letter(bits)
    }

    pub fn props(self, ap: &[String]) -> Vec<&str> {
        ap.iter()
            .enumerate()
            .filter(|(i, _)| self.contains(*i))
            .map(|(_, p)| p.as_str())
            .collect()
    }
}

pub(crate) fn check_alphabet(ap: &[String]) -> Result<()> {
    if ap.len() > MAX_AP {
        return Err(Error::AlphabetTooLarge {
            count: ap.len(),
            limit: MAX_AP,
        });
    }
    Ok(())
}

/// Deterministic finite automaton over `2^AP`.
///
/// The transition function may be partial (`None` entries); most
/// consumers require a total automaton, see [`add_rejecting_sink`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    ap: Vec<String>,
    initial: usize,
    delta: Vec<Vec<Option<usize>>>,
    accepting: Vec<bool>,
    sink: Option<usize>,
}

impl Dfa {
    /// Checks dimensions and, for a designated sink, that it is rejecting
    /// and self-looping on every letter.
    pub fn new(
        ap: Vec<String>,
        initial: usize,
        delta: Vec<Vec<Option<usize>>>,
        accepting: Vec<bool>,
        sink: Option<usize>,
    ) -> Result<Dfa> {
        check_alphabet(&ap)?;
        let n = delta.len();
        let letters = 1usize << ap.len();
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if n == 0 || initial >= n {
            return bad(format!("initial state {initial} outside 0..{n}"));
        }
        if accepting.len() != n {
            return bad("accepting vector length differs from state count".into());
        }
        for (q, row) in delta.iter().enumerate() {
            if row.len() != letters {
                return bad(format!("state {q} has {} letters, expected {letters}", row.len()));
            }
            if let Some(to) = row.iter().flatten().find(|to| **to >= n) {
                return bad(format!("state {q} points to missing state {to}"));
            }
        }
        if let Some(s) = sink {
            if s >= n || accepting[s] || delta[s].iter().any(|to| *to != Some(s)) {
                return bad(format!("state {s} is not a rejecting self-looping sink"));
            }
        }
        Ok(Dfa {
            ap,
            initial,
            delta,
            accepting,
            sink,
        })
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn num_letters(&self) -> usize {
        1 << self.ap.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.num_letters() as u32).map(Letter)
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn is_sink(&self, q: usize) -> bool {
        self.sink == Some(q)
    }

    pub fn step(&self, q: usize, letter: Letter) -> Option<usize> {
        self.delta[q][letter.0 as usize]
    }

    pub fn is_total(&self) -> bool {
        self.delta.iter().flatten().all(Option::is_some)
    }

    /// Final state of the run `q_0 … q_{n+1}` over `word`, if defined.
    pub fn run(&self, word: &[Letter]) -> Option<usize> {
        word.iter()
            .try_fold(self.initial, |q, letter| self.step(q, *letter))
    }

    pub fn accepts(&self, word: &[Letter]) -> bool {
        self.run(word).is_some_and(|q| self.accepting[q])
    }

    /// Whether `q` is non-accepting and maps to itself on every letter.
    pub fn is_rejecting_absorbing(&self, q: usize) -> bool {
        !self.accepting[q] && self.delta[q].iter().all(|to| *to == Some(q))
    }

    /// Structural isomorphism of two total automata (same AP order).
    pub fn is_isomorphic(&self, other: &Dfa) -> bool {
        if self.ap != other.ap || self.num_states() != other.num_states() {
            return false;
        }
        let mut map: HashMap<usize, usize> = HashMap::new();
        let mut back: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([(self.initial, other.initial)]);
        map.insert(self.initial, other.initial);
        back.insert(other.initial, self.initial);
        while let Some((a, b)) = queue.pop_front() {
            if self.accepting[a] != other.accepting[b] {
                return false;
            }
            for letter in self.letters() {
                match (self.step(a, letter), other.step(b, letter)) {
                    (None, None) => {}
                    (Some(x), Some(y)) => match (map.get(&x), back.get(&y)) {
                        (None, None) => {
                            map.insert(x, y);
                            back.insert(y, x);
                            queue.push_back((x, y));
                        }
                        (Some(&mx), Some(&by)) if mx == y && by == x => {}
                        _ => return false,
                    },
                    _ => return false,
                }
            }
        }
        map.len() == self.num_states()
    }

    pub fn to_json(&self) -> DfaJson {
        let name = |q: usize| format!("q{q}");
        DfaJson {
            ap: self.ap.clone(),
            states: (0..self.num_states()).map(name).collect(),
            initial: name(self.initial),
            accepting: (0..self.num_states())
                .filter(|q| self.accepting[*q])
                .map(name)
                .collect(),
            sink: self.sink.map(name),
            transitions: (0..self.num_states())
                .flat_map(|q| {
                    self.letters().filter_map(move |l| {
                        self.step(q, l).map(|to| DfaTransition {
                            from: name(q),
                            letter: l.props(&self.ap).into_iter().map(String::from).collect(),
                            to: name(to),
                        })
                    })
                })
                .collect(),
        }
    }

    pub fn from_json(json: &DfaJson) -> Result<Dfa> {
        let index: HashMap<&str, usize> = json
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let lookup = |name: &str, pointer: String| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::schema(pointer, format!("unknown automaton state `{name}`")))
        };
        check_alphabet(&json.ap)?;
        let letters = 1usize << json.ap.len();
        let mut delta = vec![vec![None; letters]; json.states.len()];
        for (i, t) in json.transitions.iter().enumerate() {
            let from = lookup(&t.from, format!("/transitions/{i}/from"))?;
            let to = lookup(&t.to, format!("/transitions/{i}/to"))?;
            if let Some(p) = t.letter.iter().find(|p| !json.ap.contains(p)) {
                return Err(Error::schema(
                    format!("/transitions/{i}/letter"),
                    format!("proposition `{p}` not in ap"),
                ));
            }
            let letter = Letter::from_props(&json.ap, &t.letter);
            delta[from][letter.0 as usize] = Some(to);
        }
        let mut accepting = vec![false; json.states.len()];
        for (i, a) in json.accepting.iter().enumerate() {
            accepting[lookup(a, format!("/accepting/{i}"))?] = true;
        }
        let initial = lookup(&json.initial, "/initial".into())?;
        let sink = json
            .sink
            .as_deref()
            .map(|s| lookup(s, "/sink".into()))
            .transpose()?;
        Dfa::new(json.ap.clone(), initial, delta, accepting, sink)
    }

    /// Graphviz rendering; parallel edges are merged into one labelled edge.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph dfa {\n  rankdir=LR;\n  __start [shape=point];\n");
        for q in 0..self.num_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let style = if self.is_sink(q) { ", style=dashed" } else { "" };
            let _ = writeln!(out, "  q{q} [shape={shape}{style}];");
        }
        let _ = writeln!(out, "  __start -> q{};", self.initial);
        for q in 0..self.num_states() {
            let mut groups: Vec<(usize, Vec<Letter>)> = Vec::new();
            for l in self.letters() {
                if let Some(to) = self.step(q, l) {
                    match groups.iter_mut().find(|(t, _)| *t == to) {
                        Some((_, ls)) => ls.push(l),
                        None => groups.push((to, vec![l])),
                    }
                }
            }
            for (to, ls) in groups {
                let label = if ls.len() == self.num_letters() {
                    "*".to_string()
                } else {
                    ls.iter()
                        .map(|l| format!("{{{}}}", l.props(&self.ap).join(",")))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let _ = writeln!(out, "  q{q} -> q{to} [label=\"{label}\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaJson {
    pub ap: Vec<String>,
    pub states: Vec<String>,
    pub initial: String,
    pub accepting: Vec<String>,
    pub sink: Option<String>,
    pub transitions: Vec<DfaTransition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DfaTransition {
    pub from: String,
    pub letter: Vec<String>,
    pub to: String,
}

/// Complete `d` by redirecting every missing transition to a rejecting
/// sink. A new sink state is only added when some entry is missing (or
/// when `force` is set); an already designated sink is reused.
pub fn add_rejecting_sink(d: &Dfa, force: bool) -> Dfa {
    let complete = d.is_total();
    if complete && !force {
        return d.clone();
    }
    let mut out = d.clone();
    let sink = match d.sink {
        Some(s) if !force => s,
        _ => {
            let s = out.delta.len();
            out.delta.push(vec![Some(s); d.num_letters()]);
            out.accepting.push(false);
            s
        }
    };
    for row in &mut out.delta {
        for entry in row.iter_mut() {
            entry.get_or_insert(sink);
        }
    }
    out.sink = Some(sink);
    out
}

/// Language-equivalent minimal automaton (Moore partition refinement on
/// the reachable part). States are renumbered in breadth-first order from
/// the initial state, letters ascending, so equal languages give equal
/// automata. The rejecting absorbing class, if any, is the sink.
pub fn minimize_dfa(d: &Dfa) -> Result<Dfa> {
    if !d.is_total() {
        return Err(Error::IncompleteAutomaton);
    }
    let letters = d.num_letters();
    let step = |q: usize, l: usize| d.delta[q][l].expect("total");

    let mut reachable = vec![false; d.num_states()];
    let mut order = vec![d.initial];
    reachable[d.initial] = true;
    let mut head = 0;
    while head < order.len() {
        let q = order[head];
        head += 1;
        for l in 0..letters {
            let to = step(q, l);
            if !reachable[to] {
                reachable[to] = true;
                order.push(to);
            }
        }
    }

    let mut class: Vec<usize> = vec![usize::MAX; d.num_states()];
    for &q in &order {
        class[q] = usize::from(d.accepting[q]);
    }
    let mut count = 0;
    loop {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = vec![usize::MAX; d.num_states()];
        for &q in &order {
            let mut sig = Vec::with_capacity(letters + 1);
            sig.push(class[q]);
            sig.extend((0..letters).map(|l| class[step(q, l)]));
            let fresh = ids.len();
            next[q] = *ids.entry(sig).or_insert(fresh);
        }
        let new_count = ids.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    // Renumber classes breadth-first over the quotient.
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut reps: Vec<usize> = Vec::new();
    let mut queue = VecDeque::from([d.initial]);
    number.insert(class[d.initial], 0);
    reps.push(d.initial);
    while let Some(q) = queue.pop_front() {
        for l in 0..letters {
            let to = step(q, l);
            if let std::collections::hash_map::Entry::Vacant(e) = number.entry(class[to]) {
                e.insert(reps.len());
                reps.push(to);
                queue.push_back(to);
            }
        }
    }
    let delta: Vec<Vec<Option<usize>>> = reps
        .iter()
        .map(|&q| (0..letters).map(|l| Some(number[&class[step(q, l)]])).collect())
        .collect();
    let accepting: Vec<bool> = reps.iter().map(|&q| d.accepting[q]).collect();
    let mut out = Dfa {
        ap: d.ap.clone(),
        initial: 0,
        delta,
        accepting,
        sink: None,
    };
    out.sink = (0..out.num_states()).find(|&q| out.is_rejecting_absorbing(q));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ap1() -> Vec<String> {
        vec!["p".into()]
    }

    /// Accepts words whose last letter contains p.
    fn ends_with_p() -> Dfa {
        Dfa::new(
            ap1(),
            0,
            vec![vec![Some(0), Some(1)], vec![Some(0), Some(1)]],
            vec![false, true],
            None,
        )
        .unwrap()
    }

    #[test]
    fn complete_dfa_unchanged_without_force() {
        let d = ends_with_p();
        assert_eq!(add_rejecting_sink(&d, false), d);
    }

    #[test]
    fn missing_entry_goes_to_new_sink() {
        let d = Dfa::new(
            ap1(),
            0,
            vec![vec![Some(0), None], vec![Some(1), Some(1)]],
            vec![true, false],
            None,
        )
        .unwrap();
        let c = add_rejecting_sink(&d, false);
        assert!(c.is_total());
        assert_eq!(c.num_states(), 3);
        assert_eq!(c.sink(), Some(2));
        assert_eq!(c.step(0, Letter(1)), Some(2));
        assert_eq!(c.step(0, Letter(0)), Some(0));
        assert!(c.letters().all(|l| c.step(2, l) == Some(2)));
    }

    #[test]
    fn forced_sink_is_unreachable() {
        let d = ends_with_p();
        let c = add_rejecting_sink(&d, true);
        assert_eq!(c.num_states(), 3);
        assert_eq!(c.sink(), Some(2));
        for q in 0..2 {
            assert!(c.letters().all(|l| c.step(q, l) != Some(2)));
        }
        // Minimization drops it again.
        assert_eq!(minimize_dfa(&c).unwrap().num_states(), 2);
    }

    #[test]
    fn minimal_dfa_is_fixed_point() {
        let d = ends_with_p();
        let m = minimize_dfa(&d).unwrap();
        assert!(m.is_isomorphic(&d));
        assert_eq!(minimize_dfa(&m).unwrap(), m);
    }

    #[test]
    fn bisimilar_accepting_states_merge() {
        // 0 -p-> 1, 0 -¬p-> 2; 1 and 2 both accepting with self-loops.
        let d = Dfa::new(
            ap1(),
            0,
            vec![
                vec![Some(2), Some(1)],
                vec![Some(1), Some(1)],
                vec![Some(2), Some(2)],
            ],
            vec![false, true, true],
            None,
        )
        .unwrap();
        let m = minimize_dfa(&d).unwrap();
        assert_eq!(m.num_states(), 2);
    }

    #[test]
    fn sink_is_detected_after_minimization() {
        let d = Dfa::new(
            ap1(),
            0,
            vec![
                vec![Some(1), Some(2)],
                vec![Some(1), Some(1)],
                vec![Some(3), Some(3)],
                vec![Some(3), Some(3)],
            ],
            vec![false, true, false, false],
            None,
        )
        .unwrap();
        let m = minimize_dfa(&d).unwrap();
        assert_eq!(m.num_states(), 3);
        let s = m.sink().expect("dead class designated");
        assert!(m.is_rejecting_absorbing(s));
    }

    #[test]
    fn json_round_trip() {
        let d = add_rejecting_sink(&ends_with_p(), true);
        let back = Dfa::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn invalid_sink_rejected() {
        let r = Dfa::new(ap1(), 0, vec![vec![Some(0), Some(0)]], vec![true], Some(0));
        assert!(r.is_err());
    }

    #[test]
    fn dot_mentions_every_state() {
        let dot = add_rejecting_sink(&ends_with_p(), true).to_dot();
        for q in ["q0", "q1", "q2"] {
            assert!(dot.contains(&format!("  {q} [")));
        }
        assert!(dot.contains("q2 -> q2 [label=\"*\"]"));
    }
}
