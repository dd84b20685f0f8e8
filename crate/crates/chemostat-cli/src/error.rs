//! Process-level error classification.
//!
//! Every failure is folded into one of five classes with a fixed exit code:
//! config parse and validation problems (and file-system trouble) exit 1,
//! a numerical abort during a run exits 2, and a golden-file divergence
//! exits 3.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// The config file is unreadable or not valid JSON.
    Parse(String),
    /// The config parsed but violates the schema or the model contracts.
    Validation(String),
    /// Reading or writing an output artifact failed.
    Io(String),
    /// The simulation aborted mid-run (with a step diagnostic).
    Numerical(String),
    /// A tolerance comparison against a golden file failed.
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) | CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Divergence(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "config parse error: {m}"),
            CliError::Validation(m) => write!(f, "config validation error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical abort: {m}"),
            CliError::Divergence(m) => write!(f, "comparison failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
