//! Experiment runner behind the `orthodyn` binary: config files, built-in
//! presets, the four workflows and their manifests.

pub mod config;
pub mod manifest;
pub mod presets;
pub mod run;

use std::fmt;

/// Failure classes mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable, malformed or physically invalid configuration.
    Config(String),
    /// Failure while running a valid configuration.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<orthodyn::Error> for CliError {
    fn from(e: orthodyn::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
