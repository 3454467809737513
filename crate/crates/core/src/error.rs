use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("not implemented: {0}")]
    NotImplemented(String),
    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },
    #[error("solver error: {0}")]
    Solver(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
