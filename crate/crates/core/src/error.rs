use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite: smallest pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { pivot: f64, index: usize },

    #[error("GLS not identifiable: p ≥ n or collinear columns ({0})")]
    NotIdentifiable(String),

    #[error("Chow-Lin not applicable in high dimensions: p = {p} ≥ n = {n}")]
    HighDimensional { p: usize, n: usize },

    #[error("LARS exceeded its step budget of {0} steps")]
    StepBudget(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Rank,
    Numerical,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Rank => 3,
            ErrorCategory::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Input => "input",
            ErrorCategory::Rank => "rank",
            ErrorCategory::Numerical => "numerical",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Io(_) => {
                ErrorCategory::Input
            }
            Error::NotIdentifiable(_) | Error::HighDimensional { .. } => ErrorCategory::Rank,
            Error::NotPositiveDefinite { .. } | Error::StepBudget(_) | Error::Numerical(_) => {
                ErrorCategory::Numerical
            }
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(format!("csv: {e}"))
    }
}
