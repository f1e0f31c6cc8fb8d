use thiserror::Error;

pub type Result<T> = std::result::Result<T, MbnError>;

#[derive(Debug, Error)]
pub enum MbnError {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("invalid layer schedule: {0}")]
    Schedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{criterion} is undefined: {reason}")]
    CriterionUndefined { criterion: String, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MbnError {
    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            MbnError::Parse { .. } => "parse",
            MbnError::InvalidDataset(_) => "invalid_dataset",
            MbnError::InvalidCode(_) => "invalid_code",
            MbnError::Format(_) => "format",
            MbnError::DimensionMismatch { .. } => "dimension_mismatch",
            MbnError::ZeroVariance(_) => "zero_variance",
            MbnError::Schedule(_) => "schedule",
            MbnError::Config(_) => "config",
            MbnError::CriterionUndefined { .. } => "criterion_undefined",
            MbnError::Shape(_) => "shape",
            MbnError::Io(_) => "io",
            MbnError::Json(_) => "json",
        }
    }

    /// Numeric code used by the C ABI and the CLI exit status.
    pub fn code(&self) -> i32 {
        match self {
            MbnError::Parse { .. } => 2,
            MbnError::InvalidDataset(_) => 3,
            MbnError::InvalidCode(_) => 4,
            MbnError::Format(_) => 5,
            MbnError::DimensionMismatch { .. } => 6,
            MbnError::ZeroVariance(_) => 7,
            MbnError::Schedule(_) => 8,
            MbnError::Config(_) => 9,
            MbnError::CriterionUndefined { .. } => 10,
            MbnError::Shape(_) => 11,
            MbnError::Io(_) => 12,
            MbnError::Json(_) => 13,
        }
    }
}
