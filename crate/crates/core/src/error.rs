use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid code distance {0}: must be odd and at least 3")]
    InvalidDistance(usize),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("schedule conflict: {0}")]
    ScheduleConflict(String),
    #[error("unsupported face weight {weight} for gadget on face {face}")]
    UnsupportedFace { face: usize, weight: usize },
    #[error("non-Clifford or unsupported instruction: {0}")]
    Unsupported(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
