//! Inference and learning for first-order linear-chain sequence labeling.
//!
//! - [`tagging`]: labelings, transition tensors, masks and the tagging polytope.
//! - [`dp`]: exact Viterbi, forward and forward-backward.
//! - [`ibp`]: mean-regularized inference by iterative Bregman projections.
//! - [`mean_field`]: the naive mean-field baseline.
//! - [`losses`]: NLL, Fenchel-Young and partial-label losses with gradients.
//! - [`oracle`]: brute-force ground truth for small problems.

pub mod dp;
pub mod error;
pub mod ibp;
pub mod logspace;
pub mod losses;
pub mod mean_field;
pub mod oracle;
pub mod tagging;

pub use error::{Error, Result};
