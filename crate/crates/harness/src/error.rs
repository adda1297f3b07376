use std::path::PathBuf;

use choice_envs::EnvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Process exit status: 2 for configuration, 3 for data and files, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) | Self::Io { .. } => 3,
            Self::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }
}

impl From<choice_core::Error> for HarnessError {
    fn from(e: choice_core::Error) -> Self {
        use choice_core::Error as E;
        match e {
            E::NonFinite(_) | E::NonFiniteGradient { .. } => Self::Numerical(e.to_string()),
            E::ShapeMismatch { .. } | E::InvalidInput(_) => Self::Config(e.to_string()),
            E::EmptyDataset | E::Checkpoint(_) | E::Json(_) => Self::Data(e.to_string()),
        }
    }
}

impl From<EnvError> for HarnessError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Core(inner) => inner.into(),
            EnvError::InvalidTask(_) | EnvError::InvalidInput(_) | EnvError::Control(_) => Self::Config(e.to_string()),
            EnvError::Demonstration { .. } | EnvError::Parse { .. } => Self::Data(e.to_string()),
        }
    }
}
