use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dataset is empty after {0}")]
    EmptyDataset(&'static str),

    #[error("split {index} would be empty (n = {n}, fraction = {fraction})")]
    EmptySplit {
        index: usize,
        n: usize,
        fraction: f64,
    },

    #[error("parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    Numerical(NumericalFailure),

    #[error("dataset carries no ground-truth probability oracle")]
    MissingOracle,

    #[error("theorem hypothesis unmet: transformation is not margin-preserving at row {row} (index {index})")]
    HypothesisUnmet { row: usize, index: usize },

    #[error("problem too large to enumerate: {what} = {value} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Details attached to a failed fit.
#[derive(Debug, Clone, PartialEq)]
pub enum NumericalFailure {
    /// The regularized Gram system could not be factored even after jitter,
    /// or produced non-finite weights.
    Solve {
        dim: usize,
        trace: f64,
        min_diag: f64,
        jitter: f64,
    },
    /// Training loss became non-finite.
    Loss { step: usize, value: f64 },
}

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumericalFailure::Solve { dim, trace, min_diag, jitter } => write!(
                f,
                "SPD solve failed (dim {dim}, trace {trace:e}, min diagonal {min_diag:e}, jitter {jitter:e})"
            ),
            NumericalFailure::Loss { step, value } => {
                write!(f, "non-finite training loss {value} at step {step}")
            }
        }
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
