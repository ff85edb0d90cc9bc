//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two set or matrix operands do not have compatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The regressor data matrix is rank deficient; the offline dataset does
    /// not excite the system enough to identify a local model.
    #[error("rank-deficient data: {0}; collect richer excitation data")]
    RankDeficient(String),

    /// A text or file payload did not match its schema.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
