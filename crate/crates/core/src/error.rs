use thiserror::Error;

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("pgm parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: String, got: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-positive curvature {curvature:e} at conjugate gradient iteration {iteration}")]
    NotPositiveDefinite { iteration: usize, curvature: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RestoreError>;

pub(crate) fn invalid(msg: impl Into<String>) -> RestoreError {
    RestoreError::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(expected: impl ToString, got: impl ToString) -> RestoreError {
    RestoreError::DimensionMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
