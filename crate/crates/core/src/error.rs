use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LscmError {
    #[error("{what} index {index} out of range (len {len})")]
    Index {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{solver} did not converge after {iterations} iterations: {detail}")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LscmError> = std::result::Result<T, E>;

pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(LscmError::Index { what, index, len })
    }
}

pub(crate) fn argument(msg: impl Into<String>) -> LscmError {
    LscmError::Argument(msg.into())
}
