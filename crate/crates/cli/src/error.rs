use std::path::PathBuf;

use cavity_readout::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, failed validation or an input the model rejects.
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    /// Results were written but at least one point did not converge.
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input { .. } => exit::CONFIG,
            Self::Io { .. } => exit::IO,
            Self::NotConverged(_) => exit::NOT_CONVERGED,
            Self::Core(e) => match e {
                CoreError::NotConverged { .. }
                | CoreError::StepFailure { .. }
                | CoreError::SolverFailure { .. } => exit::NOT_CONVERGED,
                _ => exit::CONFIG,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
