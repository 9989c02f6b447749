use std::fmt;

use chainlab::Error;

/// Failures surfaced by the command line, each with a stable exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration: exit code 2.
    Config(String),
    /// A solver failed: exit code 1.
    Numerical(String),
    /// Reading or writing files failed: exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidModel(_)
            | Error::InvalidParams(_)
            | Error::InvalidConfiguration(_)
            | Error::IncompatibleSymmetry(_) => CliError::Config(e.to_string()),
            Error::Io(m) => CliError::Io(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
