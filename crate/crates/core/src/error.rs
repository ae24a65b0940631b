use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label collision: `{0}` appears on both operands")]
    LabelCollision(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch on `{label}`: {left} vs {right}")]
    DimensionMismatch {
        label: String,
        left: usize,
        right: usize,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no certificate: {0}")]
    NoCertificate(String),
    #[error("zero heralding probability for inputs {0}")]
    ZeroHeralding(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
