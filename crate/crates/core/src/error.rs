//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by any stage of the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("audio error: {0}")]
    Audio(String),

    #[error("wav error in {path}: {source}")]
    Wav {
        path: PathBuf,
        source: hound::Error,
    },

    #[error("image error in {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("diarization error: {0}")]
    Diarization(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    /// Attach path context to an `std::io::Error`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
