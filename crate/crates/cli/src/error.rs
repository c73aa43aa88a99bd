use std::fmt;

use misselect::Error;

/// A failure together with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files (exit 1).
    Usage(String),
    /// The solver failed (exit 2).
    Solver(String),
    /// The covariance contrast is degenerate (exit 3).
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Degenerate(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::Shape(_) | Error::InsufficientReplications { .. } => {
                CliError::Usage(e.to_string())
            }
            Error::DegenerateContrast { .. } | Error::NotPositiveDefinite { .. } => {
                CliError::Degenerate(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
