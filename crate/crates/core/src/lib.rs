//! Supervised dictionary learning with auxiliary covariates.
//!
//! The crate covers the dense kernel ([`linalg`]), the multinomial
//! classification head ([`classifier`]), the SDL objectives and gradients
//! ([`loss`]), the lifted and block-coordinate solvers ([`solvers`]),
//! generative simulators ([`generative`]) and evaluation metrics ([`metrics`]).

pub mod classifier;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod metrics;
pub mod solvers;
pub mod generative;
#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Result, SdlError};
pub use linalg::{ConstraintSpec, DenseMatrix};
