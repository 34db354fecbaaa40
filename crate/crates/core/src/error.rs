use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{solver} reached its iteration limit ({iterations} iterations, relative residual {residual:.3e})")]
    IterationLimit {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("all candidates were invalid at greedy step {step}")]
    NoValidCandidate { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IterationLimit { .. }
                | Error::Factorization(_)
                | Error::NoValidCandidate { .. }
                | Error::ContractViolation(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
