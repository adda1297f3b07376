use std::fmt;
use std::str::FromStr;

use choice_core::numerics::SeededRng;
use serde::{Deserialize, Serialize};

use crate::error::{EnvError, Result};
use crate::fork::{ForkSpec, ForkWorld};
use crate::geometry::Point;
use crate::phased::{PhasedSpec, PhasedWorld};
use crate::wipe::{WipeSpec, WipeWorld};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Fork,
    Phased,
    Wipe,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Fork => "fork",
            TaskKind::Phased => "phased",
            TaskKind::Wipe => "wipe",
        })
    }
}

impl FromStr for TaskKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fork" => Ok(TaskKind::Fork),
            "phased" => Ok(TaskKind::Phased),
            "wipe" => Ok(TaskKind::Wipe),
            other => Err(EnvError::InvalidTask(format!(
                "unknown task {other:?} (expected fork, phased or wipe)"
            ))),
        }
    }
}

/// Full geometry and parameters of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Fork(ForkSpec),
    Phased(PhasedSpec),
    Wipe(WipeSpec),
}

impl TaskSpec {
    pub fn default_for(kind: TaskKind) -> Self {
        match kind {
            TaskKind::Fork => TaskSpec::Fork(ForkSpec::default()),
            TaskKind::Phased => TaskSpec::Phased(PhasedSpec::default()),
            TaskKind::Wipe => TaskSpec::Wipe(WipeSpec::default()),
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            TaskSpec::Fork(_) => TaskKind::Fork,
            TaskSpec::Phased(_) => TaskKind::Phased,
            TaskSpec::Wipe(_) => TaskKind::Wipe,
        }
    }

    /// Validates the geometry and builds the environment.
    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            TaskSpec::Fork(s) => Box::new(ForkWorld::new(s.clone())?),
            TaskSpec::Phased(s) => Box::new(PhasedWorld::new(s.clone())?),
            TaskSpec::Wipe(s) => Box::new(WipeWorld::new(s.clone())?),
        })
    }
}

/// Snapshot of any task. Fields a task does not use stay at their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnvState {
    /// End-effector position; in the wipe task it is expressed in the base frame.
    pub agent: Point,
    pub object: Point,
    pub grasped: bool,
    pub base: Point,
    pub heading: f64,
    pub phase: usize,
    pub steps: usize,
    pub success: bool,
    pub failure: Option<String>,
    /// Lowest and highest board coordinate wiped so far.
    pub coverage: Option<[f64; 2]>,
}

impl EnvState {
    pub fn is_terminal(&self) -> bool {
        self.success || self.failure.is_some()
    }

    /// Per-phase completion: phase `i` is done once a later phase was entered,
    /// and the final phase is done on success.
    pub fn stage_flags(&self, num_phases: usize) -> Vec<bool> {
        (0..num_phases)
            .map(|i| i < self.phase || (self.success && i + 1 == num_phases))
            .collect()
    }
}

/// A scripted controller that follows one demonstration mode.
pub trait Expert: Send {
    fn act(&mut self, state: &EnvState, rng: &mut SeededRng) -> Vec<f64>;
}

pub trait Environment: Send + Sync {
    fn spec(&self) -> TaskSpec;
    fn phase_names(&self) -> &'static [&'static str];
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn num_modes(&self) -> usize;
    /// Smallest distance between two demonstration modes.
    fn mode_separation(&self) -> f64;
    fn horizon_cap(&self) -> usize;
    fn initial_state(&self, rng: &mut SeededRng) -> EnvState;
    fn observe(&self, state: &EnvState) -> Vec<f64>;
    /// Advances one control step. Motion beyond the per-step bound or the
    /// workspace is clipped; terminal states are returned unchanged.
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState>;
    /// Action that holds still without asserting the grasp.
    fn idle_action(&self) -> Vec<f64>;
    /// Demonstrator for `mode`, adding uniform noise of `noise_frac` times the
    /// per-step bound to continuous channels.
    fn expert(&self, mode: usize, noise_frac: f64) -> Result<Box<dyn Expert>>;
    /// Noise fraction used when recording demonstrations.
    fn demo_noise(&self) -> f64;
}

pub(crate) fn check_action(action: &[f64], dim: usize) -> Result<()> {
    if action.len() != dim {
        return Err(EnvError::InvalidInput(format!(
            "action has {} entries, expected {dim}",
            action.len()
        )));
    }
    if action.iter().any(|v| !v.is_finite()) {
        return Err(EnvError::InvalidInput("action contains a non-finite value".into()));
    }
    Ok(())
}

pub(crate) fn check_mode(mode: usize, modes: usize) -> Result<()> {
    if mode >= modes {
        return Err(EnvError::InvalidInput(format!("mode {mode} out of range for {modes} modes")));
    }
    Ok(())
}

/// Uniform noise in `[-scale, scale]`.
pub(crate) fn jitter(rng: &mut SeededRng, scale: f64) -> f64 {
    if scale > 0.0 {
        rng.uniform(-scale, scale)
    } else {
        0.0
    }
}
