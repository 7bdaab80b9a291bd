//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, constants, or key values).
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller violated an API contract (constraint violation, empty input, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A numerical routine failed (singular matrix, non-finite value, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed or incompatible checkpoint / fixture file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
