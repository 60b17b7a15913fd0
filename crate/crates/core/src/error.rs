use thiserror::Error;

/// Errors produced by the quadratic polynomial toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("quadratic part is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("transform is not unimodular (det = {0})")]
    NotUnimodular(i128),

    #[error("polynomial is not integer-valued")]
    NotIntegerValued,

    #[error("coefficient {0} exceeds the supported magnitude")]
    CoefficientTooLarge(i128),

    #[error("{0} is not a prime")]
    NotPrime(i64),

    #[error("{0} must be an odd prime")]
    NotOddPrime(i64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn parse(pos: usize, msg: impl Into<String>) -> Self {
        Error::Parse { pos, msg: msg.into() }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
