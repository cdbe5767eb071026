use std::path::{Path, PathBuf};

use qkinetic_core::Error as CoreError;

use crate::config::ConfigError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const CAPACITY: u8 = 3;
    pub const NUMERICAL: u8 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        source: CoreError,
    },
    /// A self-check finished but missed its tolerance.
    #[error("{module}: {message}")]
    Check {
        module: &'static str,
        message: String,
    },
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Core { source, .. } => match source {
                CoreError::CapacityExceeded { .. } => exit::CAPACITY,
                CoreError::InvalidParameter { .. }
                | CoreError::OffGrid { .. }
                | CoreError::DeltaMismatch { .. }
                | CoreError::InvalidLattice(_)
                | CoreError::LengthMismatch { .. }
                | CoreError::NegativeOccupation { .. }
                | CoreError::DivergentOccupation { .. } => exit::CONFIG,
                CoreError::NegativeField { .. }
                | CoreError::Quadrature { .. }
                | CoreError::StepUnderflow { .. }
                | CoreError::UnreachableEquilibrium { .. }
                | CoreError::SolverStalled { .. } => exit::NUMERICAL,
            },
            CliError::Check { .. } => exit::NUMERICAL,
            CliError::Io { .. } | CliError::Output(_) => exit::IO,
        }
    }
}

/// Tags a core error with the module that raised it.
pub(crate) trait InModule<T> {
    fn in_module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> InModule<T> for Result<T, CoreError> {
    fn in_module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { module, source })
    }
}
