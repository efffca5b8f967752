use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis routines and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A descriptor has no value for this input (e.g. CV of a zero-mean epoch).
    #[error("undefined descriptor: {0}")]
    UndefinedDescriptor(String),

    #[error("insufficient scales: {found} usable, at least {required} required")]
    InsufficientScales { found: usize, required: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("moment order q = {q} over/underflows")]
    ExtremeQ { q: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn undefined(msg: impl Into<String>) -> Self {
        Error::UndefinedDescriptor(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
