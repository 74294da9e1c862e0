use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar pose in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn origin() -> Self {
        Self::default()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.theta)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], wrap_angle(v[2]))
    }

    /// `self ⊕ delta`: applies a relative motion expressed in this pose's frame.
    pub fn compose(self, delta: Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * delta.x - s * delta.y,
            self.y + s * delta.x + c * delta.y,
            wrap_angle(self.theta + delta.theta),
        )
    }

    /// Pose of `other` expressed in this pose's frame (`self⁻¹ ⊕ other`).
    pub fn between(self, other: Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose2::new(c * dx + s * dy, -s * dx + c * dy, wrap_angle(other.theta - self.theta))
    }

    pub fn distance(self, other: Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing of `other` in this pose's frame.
    pub fn bearing_to(self, other: Pose2) -> f64 {
        wrap_angle((other.y - self.y).atan2(other.x - self.x) - self.theta)
    }

    /// Tangent-space difference `self ⊖ reference` with a wrapped angle.
    pub fn minus(self, reference: Pose2) -> Vector3<f64> {
        Vector3::new(
            self.x - reference.x,
            self.y - reference.y,
            wrap_angle(self.theta - reference.theta),
        )
    }

    /// Retraction: applies a tangent-space increment.
    pub fn plus(self, d: &Vector3<f64>) -> Pose2 {
        Pose2::new(self.x + d[0], self.y + d[1], wrap_angle(self.theta + d[2]))
    }
}

/// Residual of a relative-pose measurement `z` between `a` and `b`, together
/// with the Jacobians with respect to `a` and `b`.
pub fn between_residual(a: Pose2, b: Pose2, z: Pose2) -> (Vector3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = a.theta.sin_cos();
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let predicted = a.between(b);
    let e = Vector3::new(
        predicted.x - z.x,
        predicted.y - z.y,
        wrap_angle(predicted.theta - z.theta),
    );
    let ja = Matrix3::new(
        -c,
        -s,
        -s * dx + c * dy,
        s,
        -c,
        -c * dx - s * dy,
        0.0,
        0.0,
        -1.0,
    );
    let jb = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    (e, ja, jb)
}
