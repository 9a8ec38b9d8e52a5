//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by corpus handling, the numeric core, training and
/// inference. CLI layers map these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({details})")]
    ShapeMismatch { op: &'static str, details: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("corpus line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("narrative {id}: {message}")]
    Narrative { id: String, message: String },

    #[error("cross entropy: all positions ignored (empty loss)")]
    EmptyLoss,

    #[error("gradient check is unreliable: repeated forward passes disagree ({0})")]
    UnreliableCheck(String),

    #[error("training diverged: loss is not finite at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the numeric machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. } | Error::UnreliableCheck(_) | Error::EmptyLoss
        )
    }
}
