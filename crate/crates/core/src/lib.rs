//! Black-box auditing of classifiers through their Fourier spectrum.
//!
//! A model is a labeling oracle on `{-1,+1}^n`. Robustness and individual
//! fairness are linear in the squared Fourier coefficients, so a list of the
//! heavy coefficients found by a Goldreich-Levin search gives an estimate of
//! both. Statistical parity is recovered from the coefficients on the empty set
//! and on the sensitive coordinate.

pub mod audit;
pub mod baselines;
pub mod basis;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod goldreich_levin;
pub mod guarantees;
pub mod harness;
pub mod models;
pub mod point;
pub mod rng;

pub use error::{AuditError, OracleError, Result};
