//! Experiment orchestration for `platelab`: configuration, commands, and
//! emission of CSV tables, JSON reports and plot data.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{run_command, Command, Outcome, RunOptions};
pub use config::{parse_config, parse_config_str, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write outputs: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<platelab_core::Error> for CliError {
    fn from(e: platelab_core::Error) -> Self {
        match e {
            platelab_core::Error::Config(m) => CliError::Config(vec![m]),
            platelab_core::Error::Numerical(m) | platelab_core::Error::Degenerate(m) => CliError::Numerical(m),
        }
    }
}
