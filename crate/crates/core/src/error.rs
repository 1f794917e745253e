use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("pole: {0}")]
    Pole(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("index {index} out of range (max {max})")]
    Index { index: usize, max: usize },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("Cholesky breakdown at row {row}; raise the working precision")]
    CholeskyBreakdown { row: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown experiment id {0:?}")]
    UnknownExperiment(String),
    #[error("cache file {path}: {msg}")]
    Cache { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by an iteration, node or term budget running out.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Budget(_)
                | Error::Overflow(_)
                | Error::NonConvergence(_)
                | Error::CholeskyBreakdown { .. }
        )
    }

    /// True for errors caused by evaluating outside an operation's domain.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Pole(_) | Error::Domain(_) | Error::Index { .. } | Error::UnknownExperiment(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
