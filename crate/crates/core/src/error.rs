//! Error type shared by all modules.

use thiserror::Error;

/// Failure categories.  `InvalidInput` and `Hypothesis` indicate caller
/// errors, `Numeric` and `Quadrature` indicate that an algorithm could not
/// reach its accuracy contract, and `PropertyViolation` reports that a
/// mathematical property under verification failed on concrete data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A hypothesis required by the operation does not hold for the data.
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    /// A matrix expected to be positive definite failed its Cholesky
    /// factorization.
    #[error("matrix not positive definite ({context})")]
    NotPositiveDefinite { context: String },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("property violation: {0}")]
    PropertyViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn hypothesis(msg: impl Into<String>) -> Self {
        Error::Hypothesis(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn violation(msg: impl Into<String>) -> Self {
        Error::PropertyViolation(msg.into())
    }
}
