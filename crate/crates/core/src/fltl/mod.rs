//! Finite-trace LTL: parsing, semantics and translation to DFAs.

mod ast;
mod dfa;
mod parse;
mod semantics;
mod translate;

pub use ast::{Formula, PropId};
pub use dfa::{add_rejecting_sink, minimize_dfa, Dfa, DfaJson, DfaTransition, Letter, MAX_AP};
pub use parse::{parse_fltl, tokenize, Token, TokenKind};
pub use semantics::{evaluate, holds, holds_on_empty};
pub use translate::{to_dfa, to_dfa_with_limit, DEFAULT_STATE_LIMIT};
