use thiserror::Error;

#[derive(Debug, Error)]
pub enum PalmError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("lengthscale component {index} must be strictly positive and finite")]
    BadLengthscale { index: usize },

    #[error("nugget must be nonnegative and finite")]
    BadNugget,

    #[error("factorization failed at pivot {pivot} of {size}: matrix is not positive definite{hint}")]
    Factorization {
        size: usize,
        pivot: usize,
        hint: &'static str,
    },

    #[error("not enough data: need at least {needed} rows, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("unsupported model file version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PalmError>;
