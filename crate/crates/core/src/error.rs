//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("Fock cutoff too small: truncated tail mass {tail:.3e} exceeds {limit:.1e}")]
    CutoffTooSmall { tail: f64, limit: f64 },

    #[error("loss fraction {0} outside [0, 1]")]
    InvalidLoss(f64),

    #[error("transmissivity {0} outside [0, 1]")]
    InvalidTransmissivity(f64),

    #[error("degenerate cat normalization (N ≤ {0:.1e})")]
    DegenerateCat(f64),

    #[error("no herald: click probability {0:.3e} below threshold")]
    NoHerald(f64),

    #[error("mode grid too short: spans {spanned:.3e} s before t=0, need {needed:.3e} s")]
    TruncatedMode { spanned: f64, needed: f64 },

    #[error("ambiguous principal mode: relative eigenvalue gap {0:.3e} below 1e-6")]
    AmbiguousMode(f64),

    #[error("time-grid mismatch: {0}")]
    GridMismatch(String),

    #[error("ragged trace input: expected length {expected}, trace {index} has {got}")]
    RaggedTraces {
        expected: usize,
        index: usize,
        got: usize,
    },

    #[error("insufficient phases: tomography needs at least 2 distinct LO phases, got {0}")]
    InsufficientPhases(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
