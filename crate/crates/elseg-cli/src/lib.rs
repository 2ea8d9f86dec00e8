//! Implementation of the `elseg` subcommands.
//!
//! Exit-code contract: 0 on success, 1 on validation errors (bad flags or
//! flag combinations, caught before any I/O), 2 on runtime and I/O errors.
//! Diagnostics go to standard error; data goes to files or standard output.

pub mod commands;
pub mod e2e;

use std::fmt;

/// Toolkit version plus the versions of every on-disk format it speaks.
pub const VERSION_STRING: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (formats: manifest v1, models v1, metrics-csv v1, selection v1, heatmap-legend v1, \
     provenance-jsonl v1, report v1)"
);

/// Errors split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or combinations; exit code 1.
    Validation(String),
    /// Anything that went wrong while doing the work; exit code 2.
    Runtime(anyhow::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::Runtime(err) => write!(f, "{err:#}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<elseg::Error> for CliError {
    fn from(err: elseg::Error) -> Self {
        CliError::Runtime(err.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(err: anyhow::Error) -> Self {
        CliError::Runtime(err)
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(err.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
