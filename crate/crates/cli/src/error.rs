use gbesq::GbesqError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numeric(GbesqError),

    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),

    #[error("{failed} of {total} acceptance criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for anything wrong with the inputs, 3 for failures while computing
    /// or writing, 1 when `validate` ran but some criterion failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
            CliError::CriteriaFailed { .. } => 1,
        }
    }
}

impl From<GbesqError> for CliError {
    /// Errors about inputs that only surface once a computation starts are
    /// still reported as config errors.
    fn from(e: GbesqError) -> Self {
        match e {
            GbesqError::InvalidFunction(_)
            | GbesqError::InvalidMeasure(_)
            | GbesqError::OutOfRange { .. }
            | GbesqError::InvalidTimeChange(_)
            | GbesqError::InvalidParameter { .. }
            | GbesqError::InvalidDrift(_) => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e),
        }
    }
}
