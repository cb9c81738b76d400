use std::io;

use crate::protocol::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value is outside its domain. `field` names the offending item.
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    /// Essay length outside the configured bounds.
    #[error("{stage}: {count} words, expected {min}..={max}")]
    WordCount {
        stage: String,
        count: usize,
        min: usize,
        max: usize,
    },

    /// Operation attempted at the wrong protocol stage.
    #[error("operation `{operation}` not allowed at stage {actual}")]
    State { operation: String, actual: Stage },

    #[error("unknown session {0}")]
    UnknownSession(String),

    /// A stored outcome does not match a fresh recomputation.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A statistic is undefined for the given input (single class, zero variance, ...).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("could not parse model response ({reason}): {raw:?}")]
    Parse { reason: String, raw: String },

    /// Chat endpoint could not be reached. Aborts a baseline run.
    #[error("endpoint unreachable: {0}")]
    Transport(String),

    /// Storage failure. Callers may retry.
    #[error("storage error: {0}")]
    Storage(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Storage(_) | Error::Transport(_))
    }
}
