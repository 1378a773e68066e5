use super::RobotState;
use crate::geometry::Vec2;

/// Spacing of trajectory samples; equal to the simulation tick so that the
/// executor always lands on a sample.
pub const TRAJECTORY_DT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySample {
    /// Seconds since the start of the plan.
    pub t: f64,
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

/// Uniformly sampled motion starting at the robot's current state. Between
/// samples the acceleration of the earlier sample is held; past the last
/// sample the motion continues at constant velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub horizon: f64,
}

impl Trajectory {
    /// Zero-length trajectory holding the current state.
    pub fn stationary(state: &RobotState) -> Self {
        Trajectory {
            samples: vec![TrajectorySample {
                t: 0.0,
                position: state.position,
                velocity: state.velocity,
                acceleration: Vec2::ZERO,
            }],
            horizon: 0.0,
        }
    }

    /// Integrates piecewise-constant accelerations, one per sample interval.
    pub fn from_accelerations(position: Vec2, velocity: Vec2, accels: &[Vec2]) -> Self {
        let mut samples = Vec::with_capacity(accels.len() + 1);
        let (mut p, mut v) = (position, velocity);
        let h = TRAJECTORY_DT;
        for (k, &a) in accels.iter().enumerate() {
            samples.push(TrajectorySample {
                t: k as f64 * h,
                position: p,
                velocity: v,
                acceleration: a,
            });
            p += v * h + a * (0.5 * h * h);
            v += a * h;
        }
        samples.push(TrajectorySample {
            t: accels.len() as f64 * h,
            position: p,
            velocity: v,
            acceleration: Vec2::ZERO,
        });
        Trajectory {
            samples,
            horizon: accels.len() as f64 * h,
        }
    }

    /// Decelerate at `a_max` along the current velocity until at rest.
    pub fn braking(state: &RobotState, a_max: f64) -> Self {
        let h = TRAJECTORY_DT;
        let mut accels = Vec::new();
        let mut v = state.velocity;
        while v.norm() > 0.0 {
            let speed = v.norm();
            if speed <= a_max * h {
                accels.push(-v / h);
                break;
            }
            let a = -v.normalized() * a_max;
            accels.push(a);
            v += a * h;
        }
        let mut traj = Trajectory::from_accelerations(state.position, state.velocity, &accels);
        if let Some(last) = traj.samples.last_mut() {
            if !accels.is_empty() {
                last.velocity = Vec2::ZERO;
            }
        }
        traj
    }

    pub fn first(&self) -> &TrajectorySample {
        &self.samples[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Position and velocity `t` seconds after the start.
    pub fn state_at(&self, t: f64) -> (Vec2, Vec2) {
        let h = TRAJECTORY_DT;
        let t = t.max(0.0);
        let last = self.last();
        if t >= last.t {
            let tau = t - last.t;
            return (last.position + last.velocity * tau, last.velocity);
        }
        let k = (t / h + 1e-9).floor() as usize;
        let s = &self.samples[k.min(self.samples.len() - 1)];
        let tau = t - s.t;
        if tau.abs() < 1e-9 {
            return (s.position, s.velocity);
        }
        (
            s.position + s.velocity * tau + s.acceleration * (0.5 * tau * tau),
            s.velocity + s.acceleration * tau,
        )
    }

    pub fn max_acceleration(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.acceleration.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.velocity.norm())
            .fold(0.0, f64::max)
    }

    /// Drops samples past `horizon` seconds.
    pub fn truncate(&mut self, horizon: f64) {
        let keep = self.samples.iter().take_while(|s| s.t <= horizon + 1e-9).count().max(1);
        self.samples.truncate(keep);
        if let Some(last) = self.samples.last_mut() {
            last.acceleration = Vec2::ZERO;
        }
        self.horizon = self.last().t;
    }
}
