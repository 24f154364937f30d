use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure after step {}: {message}", last_step.map_or_else(|| "none".to_string(), |k| k.to_string()))]
    Numerical { message: String, last_step: Option<usize> },

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0} check(s) failed")]
    CheckFailed(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn numerical(err: &discrete_routh::Error, last_step: Option<usize>) -> Self {
        CliError::Numerical { message: err.to_string(), last_step }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } | CliError::CheckFailed(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
