//! 4-DoF camera poses and their quaternion / normalized label forms.
//!
//! Conventions: world z is up. At yaw 0 and pitch 0 the camera looks along
//! world +x with +y to its left. Yaw turns the camera about world-up
//! (counter-clockwise seen from above), then pitch tilts it about its own
//! right axis, positive pitch looking up. Roll is always zero. The camera
//! orientation quaternion maps camera-frame vectors (x forward, y left,
//! z up) into the world frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Camera height above ground, meters.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.7;

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed smallest difference `a - b` wrapped into `[-180, 180]`.
pub fn yaw_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Degrees, `[0, 360)`.
    pub yaw: f64,
    /// Degrees.
    pub pitch: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64, pitch: f64) -> Self {
        Pose {
            x,
            y,
            z: DEFAULT_CAMERA_HEIGHT,
            yaw: wrap_degrees(yaw),
            pitch,
        }
    }

    pub fn with_height(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn orientation(&self) -> Quaternion {
        yaw_pitch_to_quat(self.yaw, self.pitch)
    }
}

/// Unit quaternion `w + xi + yj + zk` with a canonical sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Normalizes and canonicalizes raw components; fails on zero norm.
    pub fn from_components(c: [f64; 4]) -> Result<Self> {
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateLabel);
        }
        Ok(Quaternion {
            w: c[0] / norm,
            x: c[1] / norm,
            y: c[2] / norm,
            z: c[3] / norm,
        }
        .canonical())
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn negated(&self) -> Quaternion {
        Quaternion {
            w: -self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// `w > 0`, or `w == 0` and the first nonzero component positive.
    pub fn canonical(self) -> Quaternion {
        let first_nonzero = self
            .components()
            .into_iter()
            .find(|v| *v != 0.0)
            .unwrap_or(1.0);
        if first_nonzero < 0.0 {
            self.negated()
        } else {
            self
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.components()
            .into_iter()
            .find(|v| *v != 0.0)
            .is_some_and(|v| v > 0.0)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(&t)
    }
}

/// Yaw about world-up, then pitch about the camera-right axis.
pub fn yaw_pitch_to_quat(yaw_deg: f64, pitch_deg: f64) -> Quaternion {
    let (sy, cy) = (yaw_deg.to_radians() / 2.0).sin_cos();
    let (sp, cp) = (pitch_deg.to_radians() / 2.0).sin_cos();
    // qz(yaw) * q_{-y}(pitch): camera-right is -y in the camera frame
    Quaternion {
        w: cy * cp,
        x: sy * sp,
        y: -cy * sp,
        z: sy * cp,
    }
    .canonical()
}

/// Inverse of [`yaw_pitch_to_quat`] for roll-free rotations; yaw in `[0, 360)`.
/// At the pitch singularity (looking straight up or down) yaw is reported as 0.
pub fn quat_to_yaw_pitch(q: &Quaternion) -> (f64, f64) {
    let forward = q.rotate(&Vec3::x());
    let horizontal = forward.x.hypot(forward.y);
    let pitch = forward.z.atan2(horizontal).to_degrees();
    let yaw = if horizontal < 1e-12 {
        0.0
    } else {
        wrap_degrees(forward.y.atan2(forward.x).to_degrees())
    };
    (yaw, pitch)
}

/// Rotation angle between two orientations in degrees, in `[0, 180]`.
pub fn quat_angular_distance(a: &Quaternion, b: &Quaternion) -> f64 {
    let (ua, ub) = (a.components().map(|c| c / a.norm()), b.components().map(|c| c / b.norm()));
    let sign = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
    // atan2 of chord lengths stays exact near zero, unlike acos of the dot product
    let (mut diff, mut sum) = (0.0, 0.0);
    for i in 0..4 {
        diff += (ua[i] - sign * ub[i]).powi(2);
        sum += (ua[i] + sign * ub[i]).powi(2);
    }
    2.0 * 2.0 * diff.sqrt().atan2(sum.sqrt()).to_degrees()
}

/// Area of interest: `[x0, x0 + width] x [y0, y0 + height]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Aoi {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Result<Self> {
        let aoi = Aoi {
            x0,
            y0,
            width,
            height,
        };
        aoi.validate()?;
        Ok(aoi)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x0, self.y0, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.width > 0.0) || !(self.height > 0.0) {
            return Err(Error::Config(format!(
                "area of interest needs finite origin and positive extent, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x0 + self.width && y >= self.y0 && y <= self.y0 + self.height
    }
}

/// Training target: AOI-normalized position plus orientation quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseLabel {
    pub x: f64,
    pub y: f64,
    pub q: [f64; 4],
}

impl PoseLabel {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.q[0], self.q[1], self.q[2], self.q[3]]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        PoseLabel {
            x: v[0],
            y: v[1],
            q: [v[2], v[3], v[4], v[5]],
        }
    }
}

pub fn pose_to_label(pose: &Pose, aoi: &Aoi) -> Result<PoseLabel> {
    if !aoi.contains(pose.x, pose.y) {
        return Err(Error::OutOfBounds {
            x: pose.x,
            y: pose.y,
        });
    }
    Ok(PoseLabel {
        x: (pose.x - aoi.x0) / aoi.width,
        y: (pose.y - aoi.y0) / aoi.height,
        q: yaw_pitch_to_quat(pose.yaw, pose.pitch).components(),
    })
}

/// Maps a (possibly raw, unnormalized) label back to a pose at height `z`.
/// Positions outside `[0, 1]` extrapolate linearly.
pub fn label_to_pose(label: &PoseLabel, aoi: &Aoi, z: f64) -> Result<Pose> {
    let q = Quaternion::from_components(label.q)?;
    let (yaw, pitch) = quat_to_yaw_pitch(&q);
    Ok(Pose {
        x: aoi.x0 + label.x * aoi.width,
        y: aoi.y0 + label.y * aoi.height,
        z,
        yaw,
        pitch,
    })
}
