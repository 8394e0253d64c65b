use std::path::PathBuf;

use crate::backend::BackendError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error in record `{record}`: {message}")]
    Validation { record: String, message: String },

    #[error("unknown label `{label}` for question `{question_id}`")]
    UnknownLabel { question_id: String, label: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("backend error: {0}")]
    Backend(#[from] BackendError),

    #[error("no scored records: {0}")]
    NoScoredRecords(String),

    #[error("distributions have mismatched support (K={left} vs K={right})")]
    MismatchedSupport { left: usize, right: usize },

    #[error("degenerate variance: both samples are constant")]
    DegenerateVariance,

    #[error("run failed: {failed} of {total} pairs failed (ceiling {ceiling:.1}%): {summary}")]
    FailureCeiling {
        failed: usize,
        total: usize,
        ceiling: f64,
        summary: String,
    },

    #[error("corpus checksum mismatch: {0}")]
    ChecksumMismatch(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(record: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            message: message.into(),
        }
    }

    /// True when the error originated from a text-generation backend.
    pub fn is_backend(&self) -> bool {
        matches!(self, Error::Backend(_))
    }
}
