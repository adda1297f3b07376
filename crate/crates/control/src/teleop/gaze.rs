use serde::{Deserialize, Serialize};

use super::pose::Vec3;
use crate::{ControlError, Result};

/// Closed joint interval in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleLimit {
    pub min: f64,
    pub max: f64,
}

impl AngleLimit {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min <= max) {
            return Err(ControlError::InvalidInput(format!("empty joint limit [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn unbounded() -> Self {
        Self {
            min: -std::f64::consts::PI,
            max: std::f64::consts::PI,
        }
    }

    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.min, self.max)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }
}

/// Head joint limits; these are robot configuration, not constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeLimits {
    pub yaw: AngleLimit,
    pub pitch: AngleLimit,
}

impl Default for GazeLimits {
    fn default() -> Self {
        Self {
            yaw: AngleLimit::unbounded(),
            pitch: AngleLimit {
                min: -std::f64::consts::FRAC_PI_2,
                max: std::f64::consts::FRAC_PI_2,
            },
        }
    }
}

/// Head orientation target. Roll is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeCommand {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub limits: GazeLimits,
}

/// Yaw and pitch that point the head at the hand.
///
/// With `r = hand - head`, yaw is the azimuth `atan2(r_y, r_x)` and pitch is
/// `atan2(-r_z, |r_xy|)`, so positive pitch looks down. Both are clipped to
/// their joint limits.
pub fn gaze_from_hand(hand: Vec3, head: Vec3, limits: GazeLimits) -> Result<GazeCommand> {
    let r = [hand[0] - head[0], hand[1] - head[1], hand[2] - head[2]];
    if r.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::InvalidInput("gaze points must be finite".into()));
    }
    if r == [0.0; 3] {
        return Err(ControlError::InvalidInput(
            "hand and head coincide; gaze direction is undefined".into(),
        ));
    }
    let yaw = r[1].atan2(r[0]);
    let pitch = (-r[2]).atan2(r[0].hypot(r[1]));
    Ok(GazeCommand {
        yaw: limits.yaw.clip(yaw),
        pitch: limits.pitch.clip(pitch),
        roll: 0.0,
        limits,
    })
}
