//! Error type shared across the toolkit.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DemixError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Numerical failure (decomposition did not converge, iterates blew up).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Requested an operation the named gauge or operator does not implement.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but malformed; `offset` is the byte where
    /// parsing stopped.
    #[error("unsupported format in {path} at byte {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: usize,
        message: String,
    },
}

impl DemixError {
    pub(crate) fn shape(expected: impl Into<String>, got: impl Into<String>) -> Self {
        DemixError::ShapeMismatch {
            expected: expected.into(),
            got: got.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, DemixError>;
