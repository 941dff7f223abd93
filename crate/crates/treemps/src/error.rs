use std::fmt;
use std::path::Path;

use treemps_core::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PROPERTY: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;

/// An error together with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn property(message: impl Into<String>) -> Self {
        CliError { code: EXIT_PROPERTY, message: message.into() }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::input(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::PlanInfeasible(_) | Error::TooSmall { .. } => EXIT_INFEASIBLE,
            Error::BackendTooLarge(_) | Error::TooLarge(_) => EXIT_RESOURCE,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}
