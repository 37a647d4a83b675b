use super::ast::Formula;
use super::Letter;

/// `(σ, 0) ⊨ φ` over a nonempty finite word.
///
/// Derived operators are evaluated with their own meaning rather than
/// through desugaring, so the two can be checked against each other.
///
/// # Panics
///
/// If `word` is empty; finite-trace satisfaction is only defined at
/// positions inside the word.
pub fn evaluate(phi: &Formula, word: &[Letter]) -> bool {
    assert!(!word.is_empty(), "FLTL semantics need a nonempty word");
    holds(phi, word)[0]
}

/// Truth value of `phi` at every position of `word`.
pub fn holds(phi: &Formula, word: &[Letter]) -> Vec<bool> {
    use Formula::*;
    let n = word.len();
    match phi {
        True => vec![true; n],
        False => vec![false; n],
        Atom(p) => word.iter().map(|l| l.contains(p.0)).collect(),
        Not(a) => holds(a, word).into_iter().map(|v| !v).collect(),
        And(a, b) => zip_with(holds(a, word), holds(b, word), |x, y| x && y),
        Or(a, b) => zip_with(holds(a, word), holds(b, word), |x, y| x || y),
        Implies(a, b) => zip_with(holds(a, word), holds(b, word), |x, y| !x || y),
        Iff(a, b) => zip_with(holds(a, word), holds(b, word), |x, y| x == y),
        // X φ needs a successor position: false at the last letter.
        Next(a) => {
            let inner = holds(a, word);
            (0..n).map(|i| i + 1 < n && inner[i + 1]).collect()
        }
        Until(a, b) => {
            let (left, right) = (holds(a, word), holds(b, word));
            let mut out = vec![false; n];
            for i in (0..n).rev() {
                let later = i + 1 < n && out[i + 1];
                out[i] = right[i] || (left[i] && later);
            }
            out
        }
        Eventually(a) => {
            let inner = holds(a, word);
            let mut out = vec![false; n];
            for i in (0..n).rev() {
                out[i] = inner[i] || (i + 1 < n && out[i + 1]);
            }
            out
        }
        Always(a) => {
            let inner = holds(a, word);
            let mut out = vec![false; n];
            for i in (0..n).rev() {
                out[i] = inner[i] && (i + 1 >= n || out[i + 1]);
            }
            out
        }
    }
}

fn zip_with(a: Vec<bool>, b: Vec<bool>, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
}

/// Reading used for the empty word (and thus for whether the initial DFA
/// state accepts): constants keep their value, atoms, `X` and `U` fail
/// since there is no position to witness them, connectives act pointwise.
pub fn holds_on_empty(phi: &Formula) -> bool {
    use Formula::*;
    match phi {
        True => true,
        False | Atom(_) | Next(_) | Until(..) | Eventually(_) => false,
        Always(_) => true,
        Not(a) => !holds_on_empty(a),
        And(a, b) => holds_on_empty(a) && holds_on_empty(b),
        Or(a, b) => holds_on_empty(a) || holds_on_empty(b),
        Implies(a, b) => !holds_on_empty(a) || holds_on_empty(b),
        Iff(a, b) => holds_on_empty(a) == holds_on_empty(b),
    }
}
