//! Sensor/body poses and the rigid transforms used for relabeling.

use serde::{Deserialize, Serialize};

/// Wrap an angle to (-π, π]. Values already inside come back untouched.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// World-frame pose: position in meters, intrinsic yaw-pitch-roll in
/// radians, all wrapped to (-π, π].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Additive pose perturbation; translation is applied in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta {
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub dyaw: f64,
    pub dpitch: f64,
    pub droll: f64,
}

impl PoseDelta {
    pub const ZERO: PoseDelta = PoseDelta {
        dx: 0.0,
        dy: 0.0,
        dz: 0.0,
        dyaw: 0.0,
        dpitch: 0.0,
        droll: 0.0,
    };

    pub fn is_zero(&self) -> bool {
        *self == Self::ZERO
    }
}

impl Pose {
    pub fn level(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            z,
            yaw: wrap_angle(yaw),
            pitch: 0.0,
            roll: 0.0,
        }
    }

    /// Body→world rotation matrix, R = Rz(yaw)·Ry(pitch)·Rx(roll).
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn body_to_world(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + self.x,
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + self.y,
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + self.z,
        ]
    }

    pub fn world_to_body(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation();
        let d = [p[0] - self.x, p[1] - self.y, p[2] - self.z];
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }

    /// Ground-plan SE(2) transform of a 2-D body point to the world frame;
    /// only x, y and yaw participate. Waypoint labels live in this frame.
    pub fn body_to_world_2d(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * p[0] - s * p[1] + self.x, s * p[0] + c * p[1] + self.y]
    }

    pub fn world_to_body_2d(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    /// Compose with a delta: translation in the current body frame, angles
    /// added and wrapped.
    pub fn compose(&self, delta: &PoseDelta) -> Pose {
        let t = self.body_to_world([delta.dx, delta.dy, delta.dz]);
        Pose {
            x: t[0],
            y: t[1],
            z: t[2],
            yaw: wrap_angle(self.yaw + delta.dyaw),
            pitch: wrap_angle(self.pitch + delta.dpitch),
            roll: wrap_angle(self.roll + delta.droll),
        }
    }
}
