use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    /// Cholesky hit a non-positive pivot.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("malformed observation y = {y}: {reason}")]
    MalformedObservation { y: f64, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("out-of-order observation: expected stage {expected}, got {found}")]
    StageOrder { expected: usize, found: usize },

    #[error("accumulator already finalized")]
    Finalized,
}

pub type Result<T> = std::result::Result<T, Error>;
