//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by spectral computations.
#[derive(Debug, Clone, Error)]
pub enum SpectralError {
    /// Input violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to converge or produced an
    /// inconsistent result; the message carries the (k, n) context
    /// where applicable.
    #[error("numeric failure: {0}")]
    NumericFailure(String),
}

impl SpectralError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SpectralError::InvalidInput(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        SpectralError::NumericFailure(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, SpectralError>;
