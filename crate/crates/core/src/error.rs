use thiserror::Error;

/// Errors raised across the pipeline.
///
/// `Validation` covers bad inputs (malformed records, violated invariants,
/// impossible requests); everything else is a runtime failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("non-finite loss at example {index} of the batch")]
    NonFiniteLoss { index: usize },

    #[error("generator failed at turn {turn}: {message}")]
    Generator { turn: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for input/contract problems, false for runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Validation(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
