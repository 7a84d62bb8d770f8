use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GbesqError {
    #[error("invalid piecewise function: {0}")]
    InvalidFunction(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("interval [{start}, {end}] outside [0, {horizon}]")]
    OutOfRange { start: f64, end: f64, horizon: f64 },

    #[error("invalid time change: {0}")]
    InvalidTimeChange(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid drift: {0}")]
    InvalidDrift(String),

    #[error("propagator endpoints do not match: {left} vs {right}")]
    MismatchedEndpoints { left: f64, right: f64 },

    #[error("transform argument {0} outside the domain of analyticity")]
    OutsideDomain(f64),

    #[error("distribution has no density: {0}")]
    NoDensity(String),

    #[error("inversion did not converge: {0}")]
    NonConvergence(String),

    #[error("root bracket could not be found: {0}")]
    BracketFailure(String),

    #[error("mixture truncation: {0}")]
    Truncation(String),

    #[error("missing path data: {0}")]
    MissingPathData(&'static str),
}

pub type Result<T> = std::result::Result<T, GbesqError>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> GbesqError {
    GbesqError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
