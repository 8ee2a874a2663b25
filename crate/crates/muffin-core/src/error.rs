use thiserror::Error;

/// Errors across the toolkit. Variants are deliberately distinct where the
/// cube format demands distinguishable failures (header vs. payload vs.
/// non-finite data), and coarse elsewhere.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("malformed cube header: {0}")]
    MalformedHeader(String),

    #[error("cube payload size mismatch: header claims {expected} scalars, payload holds {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },

    #[error("non-finite value at element {index} of band {band}")]
    NonFinite { index: usize, band: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
