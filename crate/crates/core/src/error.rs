use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sieve toolkit.
#[derive(Debug, Error)]
pub enum SieveError {
    /// Operands that do not live in the same group, malformed blocks, and similar misuse.
    #[error("structural error: {0}")]
    Structural(String),

    /// A numeric parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An exhaustive enumeration would exceed its configured cap.
    #[error("capacity exceeded: {what} needs {needed} but the cap is {cap}")]
    Capacity {
        what: String,
        needed: String,
        cap: String,
    },

    /// A checked mathematical invariant does not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SieveError {
    pub(crate) fn capacity(what: impl Into<String>, needed: impl ToString, cap: impl ToString) -> Self {
        SieveError::Capacity {
            what: what.into(),
            needed: needed.to_string(),
            cap: cap.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SieveError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = SieveError> = std::result::Result<T, E>;
