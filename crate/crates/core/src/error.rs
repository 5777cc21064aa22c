use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function or distribution.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two values that must belong to the same family do not.
    #[error("variant mismatch: {0}")]
    Mismatch(String),

    /// A numerical procedure failed (non-finite value, bracket failure, divergence).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training blew up; carries the last parameters that were still finite.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String, last_good: Box<crate::nn::Checkpoint> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing input file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code: 1 for configuration/input problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) | Error::Diverged { .. } => 2,
            _ => 1,
        }
    }
}
