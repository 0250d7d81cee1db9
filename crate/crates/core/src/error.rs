use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = BanditError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum BanditError {
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("degenerate pair: both arms have cost {0}")]
    DegeneratePair(f64),

    #[error("infeasible pair: threshold {tau} outside [{low}, {high}]")]
    InfeasiblePair { low: f64, high: f64, tau: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("safe cost estimation did not stop within {horizon} rounds")]
    EstimationTimeout { horizon: u64 },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BanditError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BanditError::Io {
            path: path.into(),
            source,
        }
    }
}
