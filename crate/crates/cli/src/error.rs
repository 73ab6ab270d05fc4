//! CLI error taxonomy, mapped onto process exit codes.

use kolmo_core::Error as CoreError;

/// Exit codes: 0 pass (or flagged), 1 property violation, 2 input error,
/// 3 numeric failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("property violation: {0}")]
    Violation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Violation(_) => 1,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::InvalidInput(m) => CliError::Input(m),
            CoreError::Hypothesis(m) => CliError::Input(format!("hypothesis not satisfied: {m}")),
            CoreError::NotPositiveDefinite { context } => {
                CliError::Numeric(format!("matrix not positive definite in {context}"))
            }
            CoreError::Quadrature(m) => CliError::Numeric(m),
            CoreError::Numeric(m) => CliError::Numeric(m),
            CoreError::PropertyViolation(m) => CliError::Violation(m),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Input(format!("i/o: {err}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
