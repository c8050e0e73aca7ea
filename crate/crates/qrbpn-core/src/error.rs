//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the characterization pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A parameter violated a precondition (non-finite input, empty sweep, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A program built for one computational model was handed to the other.
    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    /// Too few curve points fall inside the fit window.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An internal cross-check failed (e.g. a gate decomposition residual).
    #[error("internal consistency: {0}")]
    InternalConsistency(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
