use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite intermediate in {0}; retry with extended precision (--precision ext:<bits>)")]
    Precision(String),
    #[error("unsupported precision {0}")]
    UnsupportedPrecision(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("build: {0}")]
    Build(String),
    #[error("output is not Boolean at input {witness}: got {token}")]
    NotBoolean { witness: String, token: String },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
