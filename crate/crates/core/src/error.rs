use thiserror::Error;

/// Errors produced by the separability toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid tensor structure: {0}")]
    InvalidDims(String),

    #[error("factor index {index} out of range for {factors} factors")]
    IndexOutOfRange { index: usize, factors: usize },

    #[error("matrix is not Hermitian (max |A - A^H| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace:.12}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("negative eigenvalue {min_eigenvalue:.3e} below tolerance")]
    NegativeEigenvalue { min_eigenvalue: f64 },

    /// Some pairing tr(XP) left the double-precision range of `exp`.
    #[error("numeric range exceeded: tr(XP) = {max_pairing:.3} > {limit} at ||X||_HS = {norm:.3}")]
    Range {
        max_pairing: f64,
        limit: f64,
        norm: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported design (dim = {dim}, strength = {strength}); fall back to {fallback}")]
    UnsupportedDesign {
        dim: usize,
        strength: usize,
        fallback: &'static str,
    },

    #[error("total dimension {total_dim} too large for dense materialization (limit {limit})")]
    TooLarge { total_dim: usize, limit: usize },

    #[error("no large-norm iterate available for witness extraction")]
    NoLargeIterate,

    #[error("state is not in the interior of the separable set: {0}")]
    NotInteriorSeparable(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
