use std::io;

use thiserror::Error;

pub type Result<T, E = GslError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GslError {
    /// Invalid or inconsistent configuration, including dimension mismatches.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("insufficient demonstrations for variation {variation}: {detail}")]
    InsufficientDemos { variation: usize, detail: String },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("malformed file {path}: {detail}")]
    Format { path: String, detail: String },

    #[error("runtime failure: {0}")]
    Runtime(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GslError {
    pub fn config(msg: impl Into<String>) -> Self {
        GslError::Config(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        GslError::Contract(msg.into())
    }

    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        GslError::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
