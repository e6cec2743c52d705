//! Minimax lower bounds for statistical estimation under differential
//! privacy.
//!
//! The crate evaluates Le Cam and Fano type testing bounds for pure and
//! approximate DP and for zero-concentrated DP, builds the couplings and
//! packings those bounds are applied to, verifies privacy and admissibility
//! claims exhaustively on tiny finite mechanisms, and runs Monte-Carlo risk
//! studies of the matching private estimators (including DP-SGML, a noisy
//! projected gradient ascent on the log-likelihood).

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod couplings;
pub mod divergences;
pub mod experiments;
pub mod mechanisms;
pub mod packings;
pub mod rng;
pub mod verify;

pub use bounds::{BoundResult, PrivacyConstraint, TestForm};
pub use divergences::{ClosedFormFamily, DiscreteDistribution, DivergenceKind};
