use std::path::PathBuf;

use abr5g_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("{failed} of {total} result rows failed")]
    Partial { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Partial { .. } => 3,
            _ => 2,
        }
    }

    pub fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        CliError::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
