use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coefficients, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duality element of kind `{dual}` is not compatible with a {space} space")]
    IncompatibleDual { dual: &'static str, space: &'static str },

    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported structure: {0}")]
    Unsupported(String),

    #[error("state became non-finite; last valid time t = {last_valid_time}")]
    BlowUp { last_valid_time: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
