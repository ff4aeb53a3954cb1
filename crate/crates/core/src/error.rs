use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid map: {0}")]
    InvalidMap(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("trajectory has no location for timestamp {0}")]
    MissingTimestamp(u32),

    #[error("cell index {cell} out of range for a map of {m} cells")]
    CellOutOfRange { cell: usize, m: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("not a stochastic matrix: {0}")]
    NotStochastic(String),

    #[error("not a probability vector: {0}")]
    NotDistribution(String),

    #[error("invalid emission column: {0}")]
    InvalidEmission(String),

    #[error("no transition matrix for step {0}")]
    MissingTransition(u32),

    #[error("event prior is degenerate ({prior}); the likelihood ratio is undefined")]
    DegenerateEvent { prior: f64 },

    #[error("inconsistent observations: {0}")]
    Inconsistent(String),

    #[error("enumeration of {requested} trajectories exceeds the cap of {cap}")]
    EnumerationTooLarge { requested: f64, cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("no training data: {0}")]
    EmptyInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
