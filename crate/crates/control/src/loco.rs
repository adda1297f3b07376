//! Locomotion policy input: per-step 49-value frames and their 30-frame history.

use std::collections::VecDeque;

use choice_core::numerics::SeededRng;
use choice_core::textfmt;
use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

pub const FRAME_DIM: usize = 49;
pub const HISTORY_LEN: usize = 30;
pub const POLICY_INPUT_DIM: usize = FRAME_DIM * HISTORY_LEN;
pub const LEG_JOINTS: usize = 12;
pub const OBS_CLIP: f64 = 18.0;

pub const FORWARD_SCALE: f64 = 1.2;
pub const BACKWARD_SCALE: f64 = 0.6;
pub const LATERAL_SCALE: f64 = 0.3;
pub const YAW_SCALE: f64 = 0.3;
pub const JOINT_VEL_SCALE: f64 = 0.1;
pub const BIAS: f64 = 0.8;

/// Offsets of each field inside a frame.
pub mod layout {
    pub const SIN_PHASE: usize = 0;
    pub const COS_PHASE: usize = 1;
    pub const FORWARD: usize = 2;
    pub const LATERAL: usize = 3;
    pub const YAW: usize = 4;
    pub const JOINT_POS: usize = 5;
    pub const JOINT_VEL: usize = 17;
    pub const LAST_ACTION: usize = 29;
    pub const ANG_VEL: usize = 41;
    pub const EULER: usize = 44;
    pub const BIAS: usize = 47;
    pub const STAND: usize = 48;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocoCommand {
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
    pub moving: bool,
}

impl LocoCommand {
    pub fn stand() -> Self {
        Self {
            v_x: 0.0,
            v_y: 0.0,
            yaw_rate: 0.0,
            moving: false,
        }
    }

    pub fn walk(v_x: f64, v_y: f64, yaw_rate: f64) -> Self {
        Self {
            v_x,
            v_y,
            yaw_rate,
            moving: true,
        }
    }

    pub fn move_flag(&self) -> f64 {
        if self.moving {
            1.0
        } else {
            0.0
        }
    }
}

/// Proprioceptive state read from the robot at one control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotReadout {
    pub phase: f64,
    pub joint_pos: Vec<f64>,
    pub default_joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    pub last_action: Vec<f64>,
    pub ang_vel: Vec<f64>,
    /// Roll, pitch, yaw.
    pub euler: Vec<f64>,
}

impl RobotReadout {
    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, &[f64], usize); 6] = [
            ("joint_pos", &self.joint_pos, LEG_JOINTS),
            ("default_joint_pos", &self.default_joint_pos, LEG_JOINTS),
            ("joint_vel", &self.joint_vel, LEG_JOINTS),
            ("last_action", &self.last_action, LEG_JOINTS),
            ("ang_vel", &self.ang_vel, 3),
            ("euler", &self.euler, 3),
        ];
        for (field, v, expected) in fields {
            if v.len() != expected {
                return Err(ControlError::Length {
                    field,
                    expected,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }
}

pub type ObservationFrame = [f64; FRAME_DIM];

/// Builds one scaled, clipped observation frame.
pub fn assemble_frame(cmd: &LocoCommand, readout: &RobotReadout) -> Result<ObservationFrame> {
    readout.validate()?;
    let m = cmd.move_flag();
    let mut f = [0.0; FRAME_DIM];
    f[layout::SIN_PHASE] = readout.phase.sin();
    f[layout::COS_PHASE] = readout.phase.cos();
    if cmd.moving {
        f[layout::FORWARD] = cmd.v_x * if cmd.v_x >= 0.0 { FORWARD_SCALE } else { BACKWARD_SCALE };
        f[layout::LATERAL] = -cmd.v_y * LATERAL_SCALE;
        f[layout::YAW] = -cmd.yaw_rate * YAW_SCALE;
    }
    for j in 0..LEG_JOINTS {
        f[layout::JOINT_POS + j] = readout.joint_pos[j] - readout.default_joint_pos[j];
        f[layout::JOINT_VEL + j] = readout.joint_vel[j] * JOINT_VEL_SCALE;
        f[layout::LAST_ACTION + j] = readout.last_action[j];
    }
    f[layout::ANG_VEL..layout::ANG_VEL + 3].copy_from_slice(&readout.ang_vel);
    f[layout::EULER..layout::EULER + 3].copy_from_slice(&readout.euler);
    f[layout::BIAS] = BIAS;
    f[layout::STAND] = 1.0 - m;
    for v in f.iter_mut() {
        *v = v.clamp(-OBS_CLIP, OBS_CLIP);
    }
    Ok(f)
}

/// The last 30 frames, zero-filled until enough real frames have arrived.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    frames: VecDeque<ObservationFrame>,
    filled: usize,
}

impl Default for HistoryBuffer {
    fn default() -> Self {
        Self::new()
    }
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self {
            frames: std::iter::repeat_n([0.0; FRAME_DIM], HISTORY_LEN).collect(),
            filled: 0,
        }
    }

    /// Number of real frames held, at most 30.
    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn push(&mut self, frame: ObservationFrame) {
        self.frames.pop_front();
        self.frames.push_back(frame);
        self.filled = (self.filled + 1).min(HISTORY_LEN);
    }

    /// Frames concatenated oldest first.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(POLICY_INPUT_DIM);
        for f in &self.frames {
            out.extend_from_slice(f);
        }
        out
    }

    pub fn push_and_flatten(&mut self, frame: ObservationFrame) -> Vec<f64> {
        self.push(frame);
        self.flatten()
    }
}

/// Gait phase advanced by wall time with a fixed period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitClock {
    pub period: f64,
    pub phase: f64,
}

impl Default for GaitClock {
    fn default() -> Self {
        Self { period: 0.7, phase: 0.0 }
    }
}

impl GaitClock {
    pub fn new(period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(ControlError::InvalidInput(format!("gait period {period} must be positive")));
        }
        Ok(Self { period, phase: 0.0 })
    }

    /// Advances by `dt` seconds and returns the new phase in `[0, 2π)`.
    pub fn advance(&mut self, dt: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        self.phase = (self.phase + tau * dt / self.period).rem_euclid(tau);
        self.phase
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommandRanges {
    pub v_x: (f64, f64),
    pub v_y: (f64, f64),
    pub yaw_rate: (f64, f64),
    pub stand_prob: f64,
}

impl Default for CommandRanges {
    fn default() -> Self {
        Self {
            v_x: (-0.6, 1.0),
            v_y: (-0.5, 0.5),
            yaw_rate: (-1.0, 1.0),
            stand_prob: 0.1,
        }
    }
}

impl CommandRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("v_x", self.v_x), ("v_y", self.v_y), ("yaw_rate", self.yaw_rate)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(ControlError::InvalidInput(format!("bad {name} range [{lo}, {hi}]")));
            }
        }
        if !(0.0..=1.0).contains(&self.stand_prob) {
            return Err(ControlError::InvalidInput(format!(
                "stand probability {} outside [0, 1]",
                self.stand_prob
            )));
        }
        Ok(())
    }
}

/// Stand with probability `stand_prob`, otherwise a uniform walking command.
pub fn sample_training_command(rng: &mut SeededRng, ranges: &CommandRanges) -> LocoCommand {
    if rng.bernoulli(ranges.stand_prob) {
        return LocoCommand::stand();
    }
    LocoCommand::walk(
        rng.uniform(ranges.v_x.0, ranges.v_x.1),
        rng.uniform(ranges.v_y.0, ranges.v_y.1),
        rng.uniform(ranges.yaw_rate.0, ranges.yaw_rate.1),
    )
}

/// One input/expected-output pair of the frame conformance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub command: LocoCommand,
    pub readout: RobotReadout,
    pub expected: Vec<f64>,
}

impl GoldenCase {
    /// One line with every real written at full precision.
    pub fn to_line(&self) -> String {
        let c = &self.command;
        let r = &self.readout;
        format!(
            concat!(
                "{{\"name\":{},\"command\":{{\"v_x\":{},\"v_y\":{},\"yaw_rate\":{},\"moving\":{}}},",
                "\"readout\":{{\"phase\":{},\"joint_pos\":{},\"default_joint_pos\":{},\"joint_vel\":{},",
                "\"last_action\":{},\"ang_vel\":{},\"euler\":{}}},\"expected\":{}}}"
            ),
            serde_json::Value::String(self.name.clone()),
            textfmt::real(c.v_x),
            textfmt::real(c.v_y),
            textfmt::real(c.yaw_rate),
            c.moving,
            textfmt::real(r.phase),
            textfmt::reals(&r.joint_pos),
            textfmt::reals(&r.default_joint_pos),
            textfmt::reals(&r.joint_vel),
            textfmt::reals(&r.last_action),
            textfmt::reals(&r.ang_vel),
            textfmt::reals(&r.euler),
            textfmt::reals(&self.expected),
        )
    }
}

pub fn parse_golden(text: &str) -> Result<Vec<GoldenCase>> {
    let mut cases = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let case: GoldenCase = serde_json::from_str(line).map_err(|e| ControlError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if case.expected.len() != FRAME_DIM {
            return Err(ControlError::Length {
                field: "expected",
                expected: FRAME_DIM,
                actual: case.expected.len(),
            });
        }
        cases.push(case);
    }
    Ok(cases)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub case: String,
    pub index: usize,
    pub expected: f64,
    pub actual: f64,
}

/// Re-assembles every case and reports each entry whose bits differ.
pub fn check_conformance(cases: &[GoldenCase]) -> Result<Vec<Mismatch>> {
    let mut out = Vec::new();
    for case in cases {
        let frame = assemble_frame(&case.command, &case.readout)?;
        for (i, (&a, &e)) in frame.iter().zip(&case.expected).enumerate() {
            if a.to_bits() != e.to_bits() {
                out.push(Mismatch {
                    case: case.name.clone(),
                    index: i,
                    expected: e,
                    actual: a,
                });
            }
        }
    }
    Ok(out)
}
