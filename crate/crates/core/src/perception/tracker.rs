use nalgebra::{Matrix4, Vector4};

use crate::geometry::Vec2;

/// Process noise spectral densities: position (m^2/s) and velocity ((m/s)^2/s).
pub const PROCESS_NOISE_POS: f64 = 0.01;
pub const PROCESS_NOISE_VEL: f64 = 0.1;
/// Covariance assigned whenever an obstacle is in view.
pub const RESET_VARIANCE: f64 = 1e-6;

/// Constant-velocity Kalman track of one obstacle. State order is
/// `(x, y, vx, vy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedObstacle {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub covariance: Matrix4<f64>,
    pub radius: f64,
    pub last_seen: f64,
    pub visible_now: bool,
}

impl TrackedObstacle {
    pub fn observed(id: u32, position: Vec2, velocity: Vec2, radius: f64, time: f64) -> Self {
        TrackedObstacle {
            id,
            position,
            velocity,
            covariance: Matrix4::identity() * RESET_VARIANCE,
            radius,
            last_seen: time,
            visible_now: true,
        }
    }

    /// Ground-truth snap used for visible obstacles.
    pub fn snap(&mut self, position: Vec2, velocity: Vec2, radius: f64, time: f64) {
        self.position = position;
        self.velocity = velocity;
        self.radius = radius;
        self.covariance = Matrix4::identity() * RESET_VARIANCE;
        self.last_seen = time;
        self.visible_now = true;
    }

    /// Predicted centre after `t` seconds under constant velocity.
    #[inline]
    pub fn predict_position(&self, t: f64) -> Vec2 {
        self.position + self.velocity * t
    }

    pub fn state(&self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.velocity.x, self.velocity.y)
    }
}

/// Constant-velocity prediction step: `x <- F x`, `P <- F P F^T + Q dt`.
pub fn kf_predict(tracker: &TrackedObstacle, dt: f64) -> TrackedObstacle {
    assert!(dt > 0.0, "prediction interval must be positive");
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let q = Matrix4::from_diagonal(&Vector4::new(
        PROCESS_NOISE_POS,
        PROCESS_NOISE_POS,
        PROCESS_NOISE_VEL,
        PROCESS_NOISE_VEL,
    )) * dt;
    let x = f * tracker.state();
    let p = f * tracker.covariance * f.transpose() + q;
    TrackedObstacle {
        position: Vec2::new(x[0], x[1]),
        velocity: Vec2::new(x[2], x[3]),
        // keep exact symmetry against rounding
        covariance: (p + p.transpose()) * 0.5,
        visible_now: false,
        ..tracker.clone()
    }
}
