use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("code length mismatch: {left} bits vs {right} bits")]
    CodeLengthMismatch { left: usize, right: usize },

    #[error("record {index}: {reason}")]
    InvalidRecord { index: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no positive pair exists")]
    NoPositivePair,

    #[error("no negative pair exists")]
    NoNegativePair,

    #[error("undefined ratio: the pair set has no {0} pairs")]
    UndefinedRatio(&'static str),

    #[error("k = {k} out of range 1..={len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("preprocessing failed: {0}")]
    Preprocess(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
