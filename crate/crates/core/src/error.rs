//! Error type shared by every solver in the crate.

use thiserror::Error;

/// Failures reported by model construction, solvers and transformations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or inconsistent user input (dimensions, names, parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A parameter lies outside its admissible interval.
    #[error("inadmissible parameter {name} = {value}: {reason}")]
    Inadmissible {
        name: String,
        value: f64,
        reason: String,
    },
    /// An iterative solver did not reach its tolerance.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    /// A fixed-point iteration failed to contract.
    #[error("{what} is not contracting (measured Lipschitz estimate {lipschitz:.4})")]
    NonContraction { what: String, lipschitz: f64 },
    /// Any other numerical breakdown (singular matrix, non-finite value).
    #[error("numerical failure in {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
