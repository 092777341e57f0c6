use thiserror::Error;

/// Errors raised by the core signal chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("spectral factorization failed: {0}")]
    Factorization(String),

    #[error("trellis needs {states} states, budget is {budget}")]
    StateBudgetExceeded { states: usize, budget: usize },

    #[error("block length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("invalid code parameters: {0}")]
    InvalidCode(String),

    #[error("unknown scheme: {0}")]
    UnknownScheme(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
