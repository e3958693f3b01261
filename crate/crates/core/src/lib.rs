//! Spectral-cutoff regularization of first-kind Fredholm equations with
//! self-adjoint compact operators, and two measures of how much
//! information survives noisy data: ε-entropy/ε-capacity of the range
//! (bits) and Shannon information of the diagonal Gaussian channel (nats).

// Negated float comparisons are used on purpose: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod epsilon;
pub mod error;
pub mod format;
pub mod harness;
pub mod metric_info;
pub mod prob_info;
pub mod spectral_models;
pub mod truncation;

pub use epsilon::Epsilon;
pub use error::{Error, Result};
