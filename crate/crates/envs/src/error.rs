use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("demonstrator failed on episode {episode} (mode {mode}): {reason}")]
    Demonstration {
        episode: usize,
        mode: usize,
        reason: String,
    },
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] choice_core::Error),
    #[error(transparent)]
    Control(#[from] choice_control::ControlError),
}

pub type Result<T> = std::result::Result<T, EnvError>;
