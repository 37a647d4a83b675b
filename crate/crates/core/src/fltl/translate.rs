//! Formula to DFA by tableau expansion and subset construction.
//!
//! The formula is put in negation normal form (with weak next and
//! release as duals of next and until). An automaton state is a set of
//! alternatives; each alternative is a set of obligations for the next
//! position, either strong (a next position must exist) or weak. An
//! alternative with no strong obligation may end the word.

use std::collections::HashMap;

use super::ast::Formula;
use super::dfa::{check_alphabet, Dfa, Letter};
use super::semantics::holds_on_empty;
use crate::{Error, Result};

pub const DEFAULT_STATE_LIMIT: usize = 100_000;

type Id = u32;
const TRUE: Id = 0;
const FALSE: Id = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(Id, Id),
    Or(Id, Id),
    Next(Id),
    WeakNext(Id),
    Until(Id, Id),
    Release(Id, Id),
}

/// Hash-consed NNF nodes with light simplification.
struct Arena {
    nodes: Vec<Node>,
    index: HashMap<Node, Id>,
}

impl Arena {
    fn new() -> Arena {
        let mut arena = Arena {
            nodes: Vec::new(),
            index: HashMap::new(),
        };
        arena.intern(Node::True);
        arena.intern(Node::False);
        arena
    }

    fn intern(&mut self, node: Node) -> Id {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len() as Id;
        self.nodes.push(node);
        self.index.insert(node, id);
        id
    }

    fn and(&mut self, a: Id, b: Id) -> Id {
        match (a, b) {
            (FALSE, _) | (_, FALSE) => FALSE,
            (TRUE, x) | (x, TRUE) => x,
            _ if a == b => a,
            _ => self.intern(Node::And(a.min(b), a.max(b))),
        }
    }

    fn or(&mut self, a: Id, b: Id) -> Id {
        match (a, b) {
            (TRUE, _) | (_, TRUE) => TRUE,
            (FALSE, x) | (x, FALSE) => x,
            _ if a == b => a,
            _ => self.intern(Node::Or(a.min(b), a.max(b))),
        }
    }

    fn next(&mut self, a: Id) -> Id {
        if a == FALSE {
            FALSE
        } else {
            self.intern(Node::Next(a))
        }
    }

    fn weak_next(&mut self, a: Id) -> Id {
        if a == TRUE {
            TRUE
        } else {
            self.intern(Node::WeakNext(a))
        }
    }

    fn until(&mut self, a: Id, b: Id) -> Id {
        if b == TRUE || b == FALSE || a == FALSE {
            b
        } else {
            self.intern(Node::Until(a, b))
        }
    }

    fn release(&mut self, a: Id, b: Id) -> Id {
        if b == TRUE || b == FALSE || a == TRUE {
            b
        } else {
            self.intern(Node::Release(a, b))
        }
    }

    /// NNF of `f` (when `positive`) or of `¬f`.
    fn nnf(&mut self, f: &Formula, positive: bool) -> Id {
        use Formula::*;
        match f {
            True => {
                if positive {
                    TRUE
                } else {
                    FALSE
                }
            }
            False => self.nnf(&True, !positive),
            Atom(p) => self.intern(Node::Lit(p.0, positive)),
            Not(a) => self.nnf(a, !positive),
            And(a, b) | Or(a, b) => {
                let (x, y) = (self.nnf(a, positive), self.nnf(b, positive));
                if matches!(f, And(..)) == positive {
                    self.and(x, y)
                } else {
                    self.or(x, y)
                }
            }
            Implies(a, b) => {
                let (x, y) = (self.nnf(a, !positive), self.nnf(b, positive));
                if positive {
                    self.or(x, y)
                } else {
                    self.and(x, y)
                }
            }
            Iff(a, b) => {
                let (ap, an) = (self.nnf(a, true), self.nnf(a, false));
                let (bp, bn) = if positive {
                    (self.nnf(b, true), self.nnf(b, false))
                } else {
                    (self.nnf(b, false), self.nnf(b, true))
                };
                let both = self.and(ap, bp);
                let neither = self.and(an, bn);
                self.or(both, neither)
            }
            Next(a) => {
                let x = self.nnf(a, positive);
                if positive {
                    self.next(x)
                } else {
                    self.weak_next(x)
                }
            }
            Until(a, b) => {
                let (x, y) = (self.nnf(a, positive), self.nnf(b, positive));
                if positive {
                    self.until(x, y)
                } else {
                    self.release(x, y)
                }
            }
            Eventually(a) => {
                let x = self.nnf(a, positive);
                if positive {
                    self.until(TRUE, x)
                } else {
                    self.release(FALSE, x)
                }
            }
            Always(a) => {
                let x = self.nnf(a, positive);
                if positive {
                    self.release(FALSE, x)
                } else {
                    self.until(TRUE, x)
                }
            }
        }
    }
}

/// Obligation code: `id << 1 | strong`.
fn code(id: Id, strong: bool) -> u64 {
    (id as u64) << 1 | strong as u64
}

/// Sorted, deduplicated obligation set; `None` if contradictory.
fn normalize(mut obls: Vec<u64>) -> Option<Vec<u64>> {
    obls.sort_unstable();
    obls.dedup();
    // A strong obligation subsumes the weak one on the same formula.
    let all = obls.clone();
    obls.retain(|&c| c & 1 == 1 || all.binary_search(&(c | 1)).is_err());
    obls.retain(|&c| c != code(TRUE, false));
    let has_strong = obls.iter().any(|c| c & 1 == 1);
    if has_strong && obls.contains(&code(FALSE, false)) {
        return None;
    }
    Some(obls)
}

fn is_subset(a: &[u64], b: &[u64]) -> bool {
    let mut j = 0;
    for x in a {
        while j < b.len() && b[j] < *x {
            j += 1;
        }
        if j == b.len() || b[j] != *x {
            return false;
        }
        j += 1;
    }
    true
}

/// Sort, dedupe and drop alternatives that contain another one.
fn antichain(mut alts: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
    alts.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    alts.dedup();
    let mut kept: Vec<Vec<u64>> = Vec::with_capacity(alts.len());
    for alt in alts {
        if !kept.iter().any(|k| is_subset(k, &alt)) {
            kept.push(alt);
        }
    }
    kept.sort_unstable();
    kept
}

struct Expander<'a> {
    arena: &'a Arena,
    letter: Letter,
    out: Vec<Vec<u64>>,
}

impl Expander<'_> {
    fn run(&mut self, mut todo: Vec<Id>, mut obls: Vec<u64>) {
        while let Some(id) = todo.pop() {
            match self.arena.nodes[id as usize] {
                Node::True => {}
                Node::False => return,
                Node::Lit(p, pos) => {
                    if self.letter.contains(p) != pos {
                        return;
                    }
                }
                Node::And(a, b) => todo.extend([a, b]),
                Node::Or(a, b) => {
                    let mut left = todo.clone();
                    left.push(a);
                    self.run(left, obls.clone());
                    todo.push(b);
                }
                Node::Next(a) => obls.push(code(a, true)),
                Node::WeakNext(a) => obls.push(code(a, false)),
                Node::Until(a, b) => {
                    let mut now = todo.clone();
                    now.push(b);
                    self.run(now, obls.clone());
                    todo.push(a);
                    obls.push(code(id, true));
                }
                Node::Release(a, b) => {
                    let mut now = todo.clone();
                    now.extend([a, b]);
                    self.run(now, obls.clone());
                    todo.push(b);
                    obls.push(code(id, false));
                }
            }
        }
        if let Some(n) = normalize(obls) {
            self.out.push(n);
        }
    }
}

/// Total DFA over `2^ap` accepting exactly the finite words satisfying
/// `phi`; the empty word is accepted iff `phi` holds on it in the sense
/// of [`holds_on_empty`]. If some letter leads nowhere the dead state is
/// designated as sink. The result is not minimized.
pub fn to_dfa(phi: &Formula, ap: &[String]) -> Result<Dfa> {
    to_dfa_with_limit(phi, ap, DEFAULT_STATE_LIMIT)
}

pub fn to_dfa_with_limit(phi: &Formula, ap: &[String], max_states: usize) -> Result<Dfa> {
    check_alphabet(ap)?;
    if let Some(p) = phi.max_prop().filter(|p| *p >= ap.len()) {
        return Err(Error::InvalidModel(format!(
            "formula refers to proposition {p} but only {} are declared",
            ap.len()
        )));
    }
    let mut arena = Arena::new();
    let root = arena.nnf(phi, true);
    let initial_alt = normalize(vec![code(root, !holds_on_empty(phi))]).unwrap_or_default();
    let initial: Vec<Vec<u64>> = vec![initial_alt];

    let letters = 1u32 << ap.len();
    let mut ids: HashMap<Vec<Vec<u64>>, usize> = HashMap::new();
    let mut states: Vec<Vec<Vec<u64>>> = Vec::new();
    let mut cache: HashMap<(Vec<u64>, u32), Vec<Vec<u64>>> = HashMap::new();
    ids.insert(initial.clone(), 0);
    states.push(initial);
    let mut delta: Vec<Vec<Option<usize>>> = Vec::new();

    let mut head = 0;
    while head < states.len() {
        let current = states[head].clone();
        head += 1;
        let mut row = Vec::with_capacity(letters as usize);
        for l in 0..letters {
            let mut alts = Vec::new();
            for alt in &current {
                let key = (alt.clone(), l);
                let succ = cache.entry(key).or_insert_with(|| {
                    let mut ex = Expander {
                        arena: &arena,
                        letter: Letter(l),
                        out: Vec::new(),
                    };
                    ex.run(alt.iter().map(|c| (c >> 1) as Id).collect(), Vec::new());
                    antichain(ex.out)
                });
                alts.extend(succ.iter().cloned());
            }
            let next = antichain(alts);
            let to = match ids.get(&next) {
                Some(&q) => q,
                None => {
                    if states.len() >= max_states {
                        return Err(Error::AutomatonCapacity { limit: max_states });
                    }
                    let q = states.len();
                    ids.insert(next.clone(), q);
                    states.push(next);
                    q
                }
            };
            row.push(Some(to));
        }
        delta.push(row);
    }

    let accepting = states
        .iter()
        .map(|alts| alts.iter().any(|alt| alt.iter().all(|c| c & 1 == 0)))
        .collect();
    let sink = ids.get(&Vec::new()).copied();
    Dfa::new(ap.to_vec(), 0, delta, accepting, sink)
}
