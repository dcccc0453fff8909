use thiserror::Error;

/// Library-wide error type.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum FermiError {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A kernel denominator 1 + q^k z came within the guard distance of zero.
    #[error("z within pole-guard distance of -q^-{k}: |1 + q^k z| = {dist:.3e}")]
    PoleProximity { k: usize, dist: f64 },

    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An iterative or adaptive scheme failed to reach its tolerance.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// Requested evaluation path is invalid for the given parameters.
    #[error("path validity: {0}")]
    PathValidity(String),

    /// Non-finite value encountered where a finite one is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, FermiError>;
