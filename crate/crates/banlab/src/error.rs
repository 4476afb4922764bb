//! Error type shared across the crate.

use std::path::PathBuf;

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid session data: {0}")]
    Validation(String),

    #[error("no history found for rider '{0}'")]
    HistoryNotFound(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("optimisation did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for data/validation problems,
    /// 2 for numeric non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 2,
            _ => 1,
        }
    }
}
