use serde::{Deserialize, Serialize};

use super::pose::Pose;
use crate::loco::LocoCommand;
use crate::{ControlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    fn slot(self) -> usize {
        match self {
            Arm::Left => 0,
            Arm::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    Manipulation,
    Locomotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingTarget {
    #[default]
    Off,
    LeftHand,
    RightHand,
}

/// Controller and end-effector poses captured when an arm was engaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub controller: Pose,
    pub end_effector: Pose,
}

/// Operator interface state. An arm is engaged exactly when it holds an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TeleopMode {
    pub mode: ControlMode,
    pub tracking: TrackingTarget,
    anchors: [Option<Anchor>; 2],
}

impl TeleopMode {
    pub fn engaged(&self, arm: Arm) -> bool {
        self.anchors[arm.slot()].is_some()
    }

    pub fn anchor(&self, arm: Arm) -> Option<&Anchor> {
        self.anchors[arm.slot()].as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TeleopEvent {
    JoystickPress,
    /// Stick deflection while in locomotion mode.
    JoystickMove { v_x: f64, v_y: f64, yaw_rate: f64 },
    JoystickRelease,
    TriggerPress { arm: Arm, controller: Pose, end_effector: Pose },
    TriggerRelease { arm: Arm },
    TrackLeft,
    TrackRight,
    TrackOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: TeleopMode,
    pub command: Option<LocoCommand>,
}

/// One step of the operator state machine. Every event is accepted in every
/// state; combinations that mean nothing (e.g. stick input in manipulation
/// mode, or re-pressing a held trigger) leave the state unchanged.
pub fn mode_transition(state: &TeleopMode, event: &TeleopEvent) -> Transition {
    let mut next = *state;
    let mut command = None;
    match *event {
        TeleopEvent::JoystickPress => {
            next.mode = match state.mode {
                ControlMode::Manipulation => ControlMode::Locomotion,
                ControlMode::Locomotion => ControlMode::Manipulation,
            };
        }
        TeleopEvent::JoystickMove { v_x, v_y, yaw_rate } => {
            if state.mode == ControlMode::Locomotion {
                command = Some(LocoCommand::walk(v_x, v_y, yaw_rate));
            }
        }
        TeleopEvent::JoystickRelease => {
            if state.mode == ControlMode::Locomotion {
                command = Some(LocoCommand::stand());
            }
        }
        TeleopEvent::TriggerPress { arm, controller, end_effector } => {
            let slot = &mut next.anchors[arm.slot()];
            if state.mode == ControlMode::Manipulation && slot.is_none() {
                *slot = Some(Anchor { controller, end_effector });
            }
        }
        TeleopEvent::TriggerRelease { arm } => next.anchors[arm.slot()] = None,
        TeleopEvent::TrackLeft => next.tracking = TrackingTarget::LeftHand,
        TeleopEvent::TrackRight => next.tracking = TrackingTarget::RightHand,
        TeleopEvent::TrackOff => next.tracking = TrackingTarget::Off,
    }
    Transition { state: next, command }
}

/// End-effector target: the anchored end-effector pose moved by the
/// controller's motion since the anchor, `ee_anchor ∘ ctrl_anchor⁻¹ ∘ ctrl_now`.
pub fn anchored_ee_target(state: &TeleopMode, arm: Arm, controller_now: &Pose) -> Result<Pose> {
    let anchor = state
        .anchor(arm)
        .ok_or_else(|| ControlError::InvalidInput(format!("{arm:?} arm is not engaged")))?;
    let relative = anchor.controller.inverse().compose(controller_now);
    Ok(anchor.end_effector.compose(&relative))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t: f64,
    pub event: TeleopEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub state: TeleopMode,
    /// Locomotion commands emitted along the way, with the time they were issued.
    pub commands: Vec<(f64, LocoCommand)>,
}

/// Parses a line-delimited event log: one JSON `TimedEvent` per line, blank
/// lines ignored, timestamps non-decreasing.
pub fn parse_event_log(text: &str) -> Result<Vec<TimedEvent>> {
    let mut events = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev: TimedEvent = serde_json::from_str(line).map_err(|e| ControlError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !(ev.t >= last) {
            return Err(ControlError::Parse {
                line: i + 1,
                message: format!("timestamp {} goes backwards", ev.t),
            });
        }
        last = ev.t;
        events.push(ev);
    }
    Ok(events)
}

pub fn write_event_log(events: &[TimedEvent]) -> Result<String> {
    let mut out = String::new();
    for ev in events {
        let line = serde_json::to_string(ev).map_err(|e| ControlError::InvalidInput(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn replay(initial: &TeleopMode, events: &[TimedEvent]) -> Replay {
    let mut state = *initial;
    let mut commands = Vec::new();
    for ev in events {
        let tr = mode_transition(&state, &ev.event);
        state = tr.state;
        if let Some(c) = tr.command {
            commands.push((ev.t, c));
        }
    }
    Replay { state, commands }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn press(arm: Arm, x: f64) -> TeleopEvent {
        TeleopEvent::TriggerPress {
            arm,
            controller: Pose::from_translation([x, 0.0, 0.0]),
            end_effector: Pose::from_translation([0.0, x, 0.0]),
        }
    }

    #[test]
    fn joystick_press_toggles_mode() {
        let s = TeleopMode::default();
        let s = mode_transition(&s, &TeleopEvent::JoystickPress).state;
        assert_eq!(s.mode, ControlMode::Locomotion);
        let s = mode_transition(&s, &TeleopEvent::JoystickPress).state;
        assert_eq!(s.mode, ControlMode::Manipulation);
    }

    #[test]
    fn release_in_locomotion_emits_stand() {
        let s = mode_transition(&TeleopMode::default(), &TeleopEvent::JoystickPress).state;
        let tr = mode_transition(&s, &TeleopEvent::JoystickRelease);
        assert_eq!(tr.command, Some(LocoCommand::stand()));
        let tr = mode_transition(&TeleopMode::default(), &TeleopEvent::JoystickRelease);
        assert_eq!(tr.command, None);
    }

    #[test]
    fn re_press_captures_fresh_anchor() {
        let s = mode_transition(&TeleopMode::default(), &press(Arm::Left, 1.0)).state;
        // holding the trigger keeps the first anchor
        let held = mode_transition(&s, &press(Arm::Left, 2.0)).state;
        assert_eq!(held.anchor(Arm::Left).unwrap().controller.position[0], 1.0);
        let released = mode_transition(&held, &TeleopEvent::TriggerRelease { arm: Arm::Left }).state;
        assert!(!released.engaged(Arm::Left));
        let again = mode_transition(&released, &press(Arm::Left, 2.0)).state;
        assert_eq!(again.anchor(Arm::Left).unwrap().controller.position[0], 2.0);
        assert!(!again.engaged(Arm::Right));
    }

    #[test]
    fn tracking_events_set_target() {
        let s = mode_transition(&TeleopMode::default(), &TeleopEvent::TrackRight).state;
        assert_eq!(s.tracking, TrackingTarget::RightHand);
        let s = mode_transition(&s, &TeleopEvent::TrackLeft).state;
        assert_eq!(s.tracking, TrackingTarget::LeftHand);
    }

    #[test]
    fn unengaged_arm_has_no_target() {
        assert!(anchored_ee_target(&TeleopMode::default(), Arm::Right, &Pose::IDENTITY).is_err());
    }

    #[test]
    fn event_log_rejects_time_travel() {
        let log = "{\"t\":1.0,\"event\":{\"type\":\"joystick_press\"}}\n{\"t\":0.5,\"event\":{\"type\":\"track_left\"}}\n";
        assert!(matches!(parse_event_log(log), Err(ControlError::Parse { line: 2, .. })));
    }
}
