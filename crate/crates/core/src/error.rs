use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("power budget violated: {0}")]
    PowerViolation(String),
    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("trace {trace} exceeds budget {budget}")]
    TraceExceedsBudget { trace: f64, budget: f64 },
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("empty set")]
    EmptySet,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("rank-one purification failed: {0}")]
    PurificationFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
