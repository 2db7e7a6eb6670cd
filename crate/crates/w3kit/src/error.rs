use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("vocabulary mismatch: checkpoint has {checkpoint}, dataset has {dataset}")]
    VocabMismatch { checkpoint: String, dataset: String },

    #[error("missing predictions for {n} clip(s): {listing}", n = .0.len(), listing = .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("output path {0} exists and is not empty (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("unsupported container version {found:?} (expected {expected:?})")]
    Version { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
