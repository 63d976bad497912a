use std::fmt;

use nmwl::Error;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input file, flag or config value (exit 2).
    Input(String),
    /// A comparison could not be evaluated (exit 3).
    Numerical { id: String, message: String },
    /// A simulation check failed (exit 4).
    Verification(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Verification(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Classifies an error raised while evaluating comparison `id`.
    pub fn from_comparison(id: &str, e: Error) -> Self {
        match e.root() {
            Error::NumericalFailure(_)
            | Error::OptimizerFailure(_)
            | Error::DivergentComplexity { .. }
            | Error::DivergentExpectation { .. } => CliError::Numerical { id: id.to_string(), message: e.to_string() },
            _ => CliError::Input(format!("comparison {id}: {e}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Verification(m) | CliError::Io(m) => f.write_str(m),
            CliError::Numerical { id, message } => write!(f, "comparison {id}: {message}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
