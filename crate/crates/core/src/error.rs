use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PdrError {
    #[error("alpha must lie in (1.5, 2], got {0}")]
    InvalidAlpha(f64),
    #[error("Lipschitz modulus must be positive, got {0}")]
    NonPositiveLipschitz(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("merit forms disagree by {discrepancy:e} (scale {scale:e})")]
    FormMismatch { discrepancy: f64, scale: f64 },
    #[error("factorization built for gamma = {cached}, requested gamma = {requested}")]
    StaleFactorization { cached: f64, requested: f64 },
    #[error("factorization has not been prepared")]
    NotPrepared,
    #[error("matrix is rank deficient; Cholesky factorization failed")]
    RankDeficient,
    #[error("singular value decomposition failed: {0}")]
    SvdFailure(String),
    #[error("shifted step requires 1 - beta*L*gamma > 0, got {0}")]
    ShiftScaling(f64),
    #[error("variant {variant} is not supported by the {family} family")]
    UnsupportedVariant {
        variant: String,
        family: &'static str,
    },
}

pub type Result<T> = std::result::Result<T, PdrError>;
