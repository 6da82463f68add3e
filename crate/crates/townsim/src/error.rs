//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient susceptibles: requested {requested}, available {available}")]
    InsufficientSusceptibles { requested: usize, available: usize },

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config validation error: {0}")]
    ConfigValidation(String),

    #[error("malformed input at row {row}: {message}")]
    MalformedInput { row: usize, message: String },

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("invalid degrees of freedom: {0}")]
    InvalidDof(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
