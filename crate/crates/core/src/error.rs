use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A malformed input record; `line` is 1-based.
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn record(line: usize, msg: impl Into<String>) -> Self {
        Error::Record {
            line,
            message: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
