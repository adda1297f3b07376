//! Deterministic whole-body command math.
//!
//! * [`teleop`]: gaze targets from the hand position, clutched arm targets,
//!   grouped finger commands and the joystick mode state machine.
//! * [`loco`]: the 49-value locomotion observation frame, its 30-frame
//!   history and stand/walk command sampling.

pub mod loco;
pub mod teleop;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{field} must have length {expected}, got {actual}")]
    Length {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("malformed line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, ControlError>;
