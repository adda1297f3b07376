use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

pub type Vec3 = [f64; 3];

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(ControlError::InvalidInput("cannot normalize a zero quaternion".into()));
        }
        Ok(Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        })
    }

    /// Rotation of `angle` radians about `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if !(n > 0.0) {
            return Err(ControlError::InvalidInput("rotation axis must be non-zero".into()));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Ok(Self {
            w: c,
            x: s * axis[0] / n,
            y: s * axis[1] / n,
            z: s * axis[2] / n,
        })
    }

    pub fn conjugate(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let p = Quaternion {
            w: 0.0,
            x: v[0],
            y: v[1],
            z: v[2],
        };
        let r = *self * p * self.conjugate();
        [r.x, r.y, r.z]
    }

    /// Row-major 3x3 rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Self { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, r: Quaternion) -> Quaternion {
        Quaternion {
            w: self.w * r.w - self.x * r.x - self.y * r.y - self.z * r.z,
            x: self.w * r.x + self.x * r.w + self.y * r.z - self.z * r.y,
            y: self.w * r.y - self.x * r.z + self.y * r.w + self.z * r.x,
            z: self.w * r.z + self.x * r.y - self.y * r.x + self.z * r.w,
        }
    }
}

/// Rigid transform: rotate by `orientation`, then translate by `position`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quaternion,
}

impl Pose {
    pub const IDENTITY: Self = Self {
        position: [0.0; 3],
        orientation: Quaternion::IDENTITY,
    };

    /// Validates that the orientation is a unit quaternion (to within 1e-9).
    pub fn new(position: Vec3, orientation: Quaternion) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidInput("pose position must be finite".into()));
        }
        if (orientation.norm() - 1.0).abs() > 1e-9 {
            return Err(ControlError::InvalidInput(format!(
                "orientation norm {} is not unit",
                orientation.norm()
            )));
        }
        Ok(Self { position, orientation })
    }

    pub fn from_translation(position: Vec3) -> Self {
        Self {
            position,
            orientation: Quaternion::IDENTITY,
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let rotated = self.orientation.rotate(other.position);
        Pose {
            position: [
                self.position[0] + rotated[0],
                self.position[1] + rotated[1],
                self.position[2] + rotated[2],
            ],
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let q = self.orientation.conjugate();
        let p = q.rotate(self.position);
        Pose {
            position: [-p[0], -p[1], -p[2]],
            orientation: q,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_composes_to_identity() {
        let q = Quaternion::from_axis_angle([0.3, -1.0, 0.5], 0.9).unwrap();
        let p = Pose::new([0.4, 1.0, -0.2], q).unwrap();
        let id = p.compose(&p.inverse());
        for v in id.position {
            assert!(v.abs() < 1e-12);
        }
        assert!((id.orientation.w.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_orientation() {
        let q = Quaternion {
            w: 1.0,
            x: 0.1,
            y: 0.0,
            z: 0.0,
        };
        assert!(Pose::new([0.0; 3], q).is_err());
        assert!(Pose::new([0.0; 3], q.normalized().unwrap()).is_ok());
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = Quaternion::from_axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2).unwrap();
        let v = q.rotate([1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }
}
