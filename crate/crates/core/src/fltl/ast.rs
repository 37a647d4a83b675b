use std::fmt;

/// Index of an atomic proposition in the declared AP list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropId(pub usize);

/// FLTL syntax tree.
///
/// The eight core kinds are `True` through `Until`; `Implies`, `Iff`,
/// `Eventually` and `Always` are kept as parsed and removed by
/// [`Formula::desugar`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(PropId),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(p: usize) -> Formula {
        Formula::Atom(PropId(p))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    /// Rewrite derived operators into the core kinds:
    /// `F φ = ⊤ U φ`, `G φ = ¬F¬φ`, `a → b = ¬a ∨ b`,
    /// `a ↔ b = (a → b) ∧ (b → a)`.
    pub fn desugar(&self) -> Formula {
        use Formula::*;
        match self {
            True => True,
            False => False,
            Atom(p) => Atom(*p),
            Not(a) => Formula::not(a.desugar()),
            And(a, b) => Formula::and(a.desugar(), b.desugar()),
            Or(a, b) => Formula::or(a.desugar(), b.desugar()),
            Next(a) => Formula::next(a.desugar()),
            Until(a, b) => Formula::until(a.desugar(), b.desugar()),
            Implies(a, b) => Formula::or(Formula::not(a.desugar()), b.desugar()),
            Iff(a, b) => {
                let (a, b) = (a.desugar(), b.desugar());
                Formula::and(
                    Formula::or(Formula::not(a.clone()), b.clone()),
                    Formula::or(Formula::not(b), a),
                )
            }
            Eventually(a) => Formula::until(True, a.desugar()),
            Always(a) => Formula::not(Formula::until(True, Formula::not(a.desugar()))),
        }
    }

    pub fn is_desugared(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => true,
            Not(a) | Next(a) => a.is_desugared(),
            And(a, b) | Or(a, b) | Until(a, b) => a.is_desugared() && b.is_desugared(),
            Implies(..) | Iff(..) | Eventually(_) | Always(_) => false,
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        use Formula::*;
        match self {
            True | False | Atom(_) => 1,
            Not(a) | Next(a) | Eventually(a) | Always(a) => 1 + a.size(),
            And(a, b) | Or(a, b) | Until(a, b) | Implies(a, b) | Iff(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Largest proposition index used, if any.
    pub fn max_prop(&self) -> Option<usize> {
        use Formula::*;
        match self {
            True | False => None,
            Atom(p) => Some(p.0),
            Not(a) | Next(a) | Eventually(a) | Always(a) => a.max_prop(),
            And(a, b) | Or(a, b) | Until(a, b) | Implies(a, b) | Iff(a, b) => {
                a.max_prop().max(b.max_prop())
            }
        }
    }

    /// Fully parenthesized rendering with proposition names from `ap`.
    pub fn display<'a>(&'a self, ap: &'a [String]) -> impl fmt::Display + 'a {
        Shown { f: self, ap }
    }
}

struct Shown<'a> {
    f: &'a Formula,
    ap: &'a [String],
}

impl<'a> fmt::Display for Shown<'a> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        let sub = |g: &'a Formula| Shown { f: g, ap: self.ap };
        match self.f {
            True => write!(out, "true"),
            False => write!(out, "false"),
            Atom(p) => match self.ap.get(p.0) {
                Some(name) => write!(out, "{name}"),
                None => write!(out, "p{}", p.0),
            },
            Not(a) => write!(out, "!{}", sub(a)),
            Next(a) => write!(out, "X {}", sub(a)),
            Eventually(a) => write!(out, "F {}", sub(a)),
            Always(a) => write!(out, "G {}", sub(a)),
            And(a, b) => write!(out, "({} & {})", sub(a), sub(b)),
            Or(a, b) => write!(out, "({} | {})", sub(a), sub(b)),
            Until(a, b) => write!(out, "({} U {})", sub(a), sub(b)),
            Implies(a, b) => write!(out, "({} -> {})", sub(a), sub(b)),
            Iff(a, b) => write!(out, "({} <-> {})", sub(a), sub(b)),
        }
    }
}
