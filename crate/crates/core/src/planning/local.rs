//! Local-target sampling with minimum-jerk point-to-point trajectories.

use super::{
    ObstacleField, PlanOutcome, PlannerParams, RobotConfig, RobotState, Trajectory,
    TrajectoryPlanner, TrajectorySample, TRAJECTORY_DT,
};
use crate::geometry::Vec2;
use crate::perception::PerceptionFrame;

/// Sub-sample spacing used to bound the polynomial's acceleration between
/// trajectory samples.
const ACCEL_CHECK_DT: f64 = 0.01;

/// One axis of a minimum-jerk trajectory with fixed duration and fully
/// specified start and end states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinJerkAxis {
    pub p0: f64,
    pub v0: f64,
    pub a0: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl MinJerkAxis {
    pub fn position(&self, t: f64) -> f64 {
        self.alpha / 120.0 * t.powi(5)
            + self.beta / 24.0 * t.powi(4)
            + self.gamma / 6.0 * t.powi(3)
            + 0.5 * self.a0 * t * t
            + self.v0 * t
            + self.p0
    }

    pub fn velocity(&self, t: f64) -> f64 {
        self.alpha / 24.0 * t.powi(4)
            + self.beta / 6.0 * t.powi(3)
            + 0.5 * self.gamma * t * t
            + self.a0 * t
            + self.v0
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        self.alpha / 6.0 * t.powi(3) + 0.5 * self.beta * t * t + self.gamma * t + self.a0
    }
}

/// Closed-form jerk-optimal polynomial from `(p0, v0, a0)` to `(pf, vf, af)`
/// in time `duration`.
pub fn min_jerk_axis(p0: f64, v0: f64, a0: f64, pf: f64, vf: f64, af: f64, duration: f64) -> MinJerkAxis {
    let t = duration;
    let dp = pf - p0 - v0 * t - 0.5 * a0 * t * t;
    let dv = vf - v0 - a0 * t;
    let da = af - a0;
    let t2 = t * t;
    let t3 = t2 * t;
    let t5 = t3 * t2;
    MinJerkAxis {
        p0,
        v0,
        a0,
        alpha: (720.0 * dp - 360.0 * t * dv + 60.0 * t2 * da) / t5,
        beta: (-360.0 * t * dp + 168.0 * t2 * dv - 24.0 * t3 * da) / t5,
        gamma: (60.0 * t2 * dp - 24.0 * t3 * dv + 3.0 * t2 * t2 * da) / t5,
    }
}

#[derive(Clone, Debug)]
pub struct LocalPrimitivePlanner {
    params: PlannerParams,
    /// Start time and polynomial of the previous plan, for acceleration
    /// continuity across replans.
    last: Option<(f64, Candidate)>,
}

/// A sampled local target and the trajectory reaching it.
#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub end: Vec2,
    pub duration: f64,
    pub x: MinJerkAxis,
    pub y: MinJerkAxis,
}

impl LocalPrimitivePlanner {
    pub fn new(params: PlannerParams) -> Self {
        LocalPrimitivePlanner { params, last: None }
    }

    /// One local target per bearing, the first on the goal bearing and the
    /// rest evenly spaced around the circle. Each bearing takes the fastest
    /// end speed whose trajectory stays within the dynamic limits, or `None`
    /// when no end speed does.
    pub(crate) fn candidates(&self, state: &RobotState, goal: Vec2, cfg: &RobotConfig) -> Vec<Option<Candidate>> {
        let a0 = self.start_acceleration(state, cfg);
        let p = &self.params;
        let speed0 = state.velocity.norm().min(cfg.v_cruise);
        let s_hi = cfg.v_cruise.min(speed0 + cfg.a_max * p.local_duration * 2.0 / 3.0);
        let mut levels = vec![s_hi, (s_hi + speed0) / 2.0, speed0, speed0 / 2.0, 0.0];
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let base = (goal - state.position).angle();
        let n = p.local_samples.max(1);
        (0..n)
            .map(|k| {
                let dir = Vec2::from_angle(base + k as f64 * std::f64::consts::TAU / n as f64);
                levels
                    .iter()
                    .map(|&s_f| self.candidate(state, a0, dir, s_f, cfg))
                    .find(|c| Self::within_limits(c, cfg))
            })
            .collect()
    }

    fn candidate(&self, state: &RobotState, a0: Vec2, dir: Vec2, s_f: f64, cfg: &RobotConfig) -> Candidate {
        let speed0 = state.velocity.norm();
        let mut t = self.params.local_duration;
        let mut reach = (speed0 + s_f) / 2.0 * t;
        if reach > cfg.fov_depth {
            // keep the target inside the sensed disc by arriving sooner
            t = 2.0 * cfg.fov_depth / (speed0 + s_f);
            reach = cfg.fov_depth;
        }
        let end = state.position + dir * reach;
        let v_end = dir * s_f;
        Candidate {
            end,
            duration: t,
            x: min_jerk_axis(state.position.x, state.velocity.x, a0.x, end.x, v_end.x, 0.0, t),
            y: min_jerk_axis(state.position.y, state.velocity.y, a0.y, end.y, v_end.y, 0.0, t),
        }
    }

    /// Acceleration of the previous plan at the current time, if the robot
    /// is still following it.
    fn start_acceleration(&self, state: &RobotState, cfg: &RobotConfig) -> Vec2 {
        let Some((t0, c)) = &self.last else {
            return Vec2::ZERO;
        };
        let tau = state.time - t0;
        if !(0.0..=c.duration).contains(&tau) {
            return Vec2::ZERO;
        }
        let p = Vec2::new(c.x.position(tau), c.y.position(tau));
        let v = Vec2::new(c.x.velocity(tau), c.y.velocity(tau));
        if p.distance(state.position) > 1e-6 || v.distance(state.velocity) > 1e-6 {
            return Vec2::ZERO;
        }
        Vec2::new(c.x.acceleration(tau), c.y.acceleration(tau)).clamp_norm(cfg.a_max)
    }

    pub(crate) fn sample(c: &Candidate) -> Trajectory {
        let steps = (c.duration / TRAJECTORY_DT).floor() as usize;
        let samples = (0..=steps)
            .map(|k| {
                let t = k as f64 * TRAJECTORY_DT;
                TrajectorySample {
                    t,
                    position: Vec2::new(c.x.position(t), c.y.position(t)),
                    velocity: Vec2::new(c.x.velocity(t), c.y.velocity(t)),
                    acceleration: if k == steps {
                        Vec2::ZERO
                    } else {
                        Vec2::new(c.x.acceleration(t), c.y.acceleration(t))
                    },
                }
            })
            .collect();
        Trajectory { samples, horizon: steps as f64 * TRAJECTORY_DT }
    }

    pub(crate) fn within_limits(c: &Candidate, cfg: &RobotConfig) -> bool {
        let steps = (c.duration / ACCEL_CHECK_DT).round() as usize;
        (0..=steps).all(|k| {
            let t = k as f64 * ACCEL_CHECK_DT;
            let a = Vec2::new(c.x.acceleration(t), c.y.acceleration(t));
            let v = Vec2::new(c.x.velocity(t), c.y.velocity(t));
            a.norm() <= cfg.a_max + 1e-9 && v.norm() <= cfg.v_cruise + 1e-6
        })
    }
}

impl TrajectoryPlanner for LocalPrimitivePlanner {
    fn plan(
        &mut self,
        frame: &PerceptionFrame,
        state: &RobotState,
        goal: Vec2,
        cfg: &RobotConfig,
    ) -> PlanOutcome {
        let p = self.params;
        if state.position.distance(goal) <= p.goal_tolerance {
            return PlanOutcome::trajectory(Trajectory::stationary(state));
        }
        let mut field = ObstacleField::from_frame(frame, cfg, &p);
        field.restrict(state.position, cfg.v_cruise * p.local_duration);
        let mut best: Option<(f64, Trajectory, Candidate)> = None;
        for c in self.candidates(state, goal, cfg).into_iter().flatten() {
            let cost = c.end.distance(goal);
            if best.as_ref().is_some_and(|(b, _, _)| cost >= *b) {
                continue;
            }
            let traj = Self::sample(&c);
            if field.trajectory_is_free(&traj) {
                best = Some((cost, traj, c));
            }
        }
        match best {
            Some((_, mut traj, c)) => {
                traj.truncate(p.output_horizon);
                self.last = Some((state.time, c));
                PlanOutcome::trajectory(traj)
            }
            None => {
                self.last = None;
                PlanOutcome::brake(state, cfg)
            }
        }
    }
}

/// Plans with the default sampling parameters.
pub fn plan_local_primitive(
    frame: &PerceptionFrame,
    state: &RobotState,
    goal: Vec2,
    cfg: &RobotConfig,
) -> PlanOutcome {
    LocalPrimitivePlanner::new(PlannerParams::default()).plan(frame, state, goal, cfg)
}
