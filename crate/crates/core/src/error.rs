//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::wide::E0Violation;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Vector/matrix dimensions do not line up (bad input length,
    /// incompatible layer widths, mismatched batch sizes, ...).
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument is outside its admissible range (non-positive epsilon,
    /// delta outside (0, 1/2), layer index out of range, ...).
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// A value left the domain a construction requires (cube outside the
    /// truncation box, non-finite sample, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A grid-value vector failed the admissibility check.
    #[error("inadmissible grid-value vector: {0}")]
    E0(#[from] E0Violation),

    /// A requested computation exceeds a configured resource cap.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Reading or writing a file failed at the OS level.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its contents are malformed.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
