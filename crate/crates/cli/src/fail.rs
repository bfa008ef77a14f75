//! Error classification into exit codes.

use std::fmt;

use subriemann::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
/// `verify` ran but some property failed.
pub const EXIT_CHECKS_FAILED: i32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PRECONDITION,
            message: msg.into(),
        }
    }

    pub fn context(mut self, ctx: &str) -> Self {
        self.message = format!("{ctx}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::DimensionMismatch { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::NonConvergence(_) | Error::LeftSafetyBox { .. } => EXIT_NON_CONVERGENCE,
        _ => EXIT_PRECONDITION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::config(format!("csv: {e}"))
    }
}
