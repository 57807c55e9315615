//! Failures split by exit code.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad configuration, missing or invalid input. Exit code 2.
    Usage(String),
    /// Anything that went wrong while doing valid work, mostly I/O. Exit
    /// code 1.
    Operational(String),
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn operational(msg: impl Into<String>) -> CliError {
    CliError::Operational(msg.into())
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Operational(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Operational(m) => f.write_str(m),
        }
    }
}
