use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

/// Joint angles of one finger group at the open and closed ends of its travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerRange {
    pub open: f64,
    pub closed: f64,
}

impl FingerRange {
    pub fn new(open: f64, closed: f64) -> Result<Self> {
        if !(open.is_finite() && closed.is_finite()) {
            return Err(ControlError::InvalidInput("finger range must be finite".into()));
        }
        Ok(Self { open, closed })
    }

    /// Affine map from `[0, 1]` onto `[open, closed]`.
    pub fn at(&self, v: f64) -> f64 {
        self.open + v * (self.closed - self.open)
    }

    pub fn contains(&self, v: f64) -> bool {
        let (lo, hi) = if self.open <= self.closed {
            (self.open, self.closed)
        } else {
            (self.closed, self.open)
        };
        lo <= v && v <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandRanges {
    pub fingers: FingerRange,
    pub thumb: FingerRange,
}

impl Default for HandRanges {
    fn default() -> Self {
        Self {
            fingers: FingerRange { open: 0.0, closed: 1.7 },
            thumb: FingerRange { open: 0.0, closed: 1.2 },
        }
    }
}

/// Finger targets: four grouped fingers followed by the thumb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandCommand {
    pub grip: f64,
    pub thumb: f64,
    pub targets: [f64; 5],
    /// Set when either input was outside `[0, 1]` and had to be clamped.
    pub clamped: bool,
}

impl HandCommand {
    pub fn grouped(&self) -> &[f64] {
        &self.targets[..4]
    }

    pub fn thumb_target(&self) -> f64 {
        self.targets[4]
    }
}

/// Maps the trigger (`grip`) onto all four non-thumb fingers and the joystick
/// input onto the thumb. NaN inputs are rejected; anything else is clamped.
pub fn hand_from_inputs(grip: f64, thumb: f64, ranges: &HandRanges) -> Result<HandCommand> {
    if grip.is_nan() || thumb.is_nan() {
        return Err(ControlError::InvalidInput("hand inputs must not be NaN".into()));
    }
    let g = grip.clamp(0.0, 1.0);
    let t = thumb.clamp(0.0, 1.0);
    let f = ranges.fingers.at(g);
    Ok(HandCommand {
        grip: g,
        thumb: t,
        targets: [f, f, f, f, ranges.thumb.at(t)],
        clamped: g != grip || t != thumb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_inputs_fully_open() {
        let r = HandRanges::default();
        let h = hand_from_inputs(0.0, 0.0, &r).unwrap();
        assert_eq!(h.targets, [r.fingers.open, r.fingers.open, r.fingers.open, r.fingers.open, r.thumb.open]);
        assert!(!h.clamped);
    }

    #[test]
    fn full_grip_closes_fingers_only() {
        let r = HandRanges::default();
        let h = hand_from_inputs(1.0, 0.3, &r).unwrap();
        assert!(h.grouped().iter().all(|&v| v == r.fingers.closed));
        assert_eq!(h.thumb_target(), hand_from_inputs(0.0, 0.3, &r).unwrap().thumb_target());
    }

    #[test]
    fn half_grip_is_midpoint() {
        let r = HandRanges {
            fingers: FingerRange::new(0.2, 1.4).unwrap(),
            ..HandRanges::default()
        };
        let h = hand_from_inputs(0.5, 0.0, &r).unwrap();
        assert!(h.grouped().iter().all(|&v| (v - 0.8).abs() < 1e-15));
    }

    #[test]
    fn out_of_range_is_clamped_and_flagged() {
        let r = HandRanges::default();
        let h = hand_from_inputs(1.5, -0.2, &r).unwrap();
        assert!(h.clamped);
        assert_eq!((h.grip, h.thumb), (1.0, 0.0));
        assert!(hand_from_inputs(f64::NAN, 0.0, &r).is_err());
    }
}
