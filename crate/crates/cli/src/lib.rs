//! Operator surface of the repetition engine: pipeline subcommands and the
//! JSON service used by the composer front end.

pub mod commands;
pub mod files;
pub mod labels;
pub mod service;

use std::process::ExitCode;

use repetition_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 usage, 3 I/O, 4 invalid input data, 5 model or checkpoint, 1 other.
    pub fn exit_code(&self) -> ExitCode {
        let code = match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                CoreError::Io(_) => 3,
                CoreError::Checkpoint(_) | CoreError::ShapeMismatch { .. } | CoreError::Diverged { .. } => 5,
                CoreError::Config(_) | CoreError::InvalidLabel(_) => 2,
                CoreError::Generation(_) => 1,
                _ => 4,
            },
        };
        ExitCode::from(code)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
