//! Lexicographic planning for stochastic shortest path problems that mix
//! max-aggregated (bottleneck) and sum-aggregated costs, optionally under a
//! finite-trace LTL constraint.
//!
//! The pipeline is:
//!
//! 1. describe the system as a [`mdp::System`] with a [`mdp::CostSpec`],
//! 2. compile an FLTL formula with [`fltl::parse_fltl`] and [`fltl::to_dfa`],
//! 3. build the synchronous product with [`product::build_product`],
//! 4. solve with [`lex::solve_lexicographic`] over the `(h, s, q, λ)` space,
//! 5. simulate or evaluate the resulting policy.
//!
//! [`maxssp`] holds the infinite-horizon solver for a single bottleneck
//! objective, and [`scenario`] the gridworld builders and file formats.

pub mod error;
pub mod fltl;
pub mod lex;
pub mod maxssp;
pub mod mdp;
pub mod product;
pub mod scenario;

pub use error::{Error, Result};
