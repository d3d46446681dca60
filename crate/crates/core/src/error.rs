use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("brute-force enumeration refused: sample length {len} exceeds {max}")]
    TooLarge { len: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid value for `{field}`: {reason}")]
    Usage { field: String, reason: String },

    #[error("grid cache {path:?}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(field: &str, reason: impl Into<String>) -> Self {
        Error::Usage {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}
