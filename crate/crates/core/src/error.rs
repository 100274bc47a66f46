use thiserror::Error;

/// Errors produced by the diversity, spectral and search routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid kernel rate {0}: must be positive and finite")]
    InvalidRate(f64),

    #[error("invalid abundance: {0}")]
    InvalidAbundance(String),

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("invalid similarity matrix: {0}")]
    InvalidSimilarity(String),

    #[error("zero count for unique element {0}")]
    ZeroCount(usize),

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate variance in {0}")]
    DegenerateVariance(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
