use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, each tied to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("solver stopped at the iteration cap after {0} outer iterations (artifacts written)")]
    NotConverged(usize),

    #[error("{} not found; run `hsitd {producer}` first", path.display())]
    MissingArtifact { path: PathBuf, producer: &'static str },

    #[error("{0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] hsitd::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NotConverged(_) => 2,
            CliError::MissingArtifact { .. } | CliError::Io(_) => 3,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(hsitd::Error::Numeric { .. }) => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
