//! Operator-side control math: head gaze, arm anchoring, hand mapping and the
//! joystick mode state machine. Everything here is pure.

mod gaze;
mod hand;
mod modes;
mod pose;

pub use gaze::{gaze_from_hand, AngleLimit, GazeCommand, GazeLimits};
pub use hand::{hand_from_inputs, FingerRange, HandCommand, HandRanges};
pub use modes::{
    anchored_ee_target, mode_transition, parse_event_log, replay, write_event_log, Anchor, Arm, ControlMode,
    Replay, TeleopEvent, TeleopMode, TimedEvent, TrackingTarget, Transition,
};
pub use pose::{Pose, Quaternion, Vec3};
