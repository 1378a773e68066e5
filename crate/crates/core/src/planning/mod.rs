//! Trajectory planners and gaze policies.
//!
//! Every planner consumes a [`PerceptionFrame`] and the robot state and
//! returns a [`PlanOutcome`]: either a dynamically feasible trajectory or the
//! braking profile when nothing feasible was found.

mod gaze;
mod global;
mod local;
mod mpc;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{Bounds, Vec2};
use crate::perception::{CellState, PerceptionFrame};

pub use gaze::{plan_gaze, GazePolicy, GAZE_SETTLE_TIME};
pub use global::{plan_global_primitive, GlobalPrimitivePlanner, GlobalSearch};
pub use local::{min_jerk_axis, plan_local_primitive, LocalPrimitivePlanner, MinJerkAxis};
pub use mpc::{plan_mpc, MpcPlanner};
pub use trajectory::{Trajectory, TrajectorySample, TRAJECTORY_DT};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    pub radius: f64,
    pub a_max: f64,
    pub v_cruise: f64,
    pub yaw_rate_max: f64,
    pub fov_width: f64,
    pub fov_depth: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            radius: 1.0,
            a_max: 4.0,
            v_cruise: 4.0,
            yaw_rate_max: 1.4,
            fov_width: std::f64::consts::FRAC_PI_2,
            fov_depth: 8.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub heading: f64,
    pub time: f64,
}

impl RobotState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        RobotState {
            position,
            velocity: Vec2::ZERO,
            heading,
            time: 0.0,
        }
    }
}

/// Tunables shared by the planners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    /// Duration of one motion primitive of the global lattice.
    pub global_edge_duration: f64,
    pub global_max_expansions: usize,
    pub mpc_steps: usize,
    pub mpc_dt: f64,
    pub mpc_iterations: usize,
    pub local_duration: f64,
    pub local_samples: usize,
    /// Extra separation required from predicted obstacles.
    pub safety_margin: f64,
    /// Obstacles are predicted this far ahead; later motion is unconstrained.
    pub prediction_horizon: f64,
    /// Length of trajectory handed to the executor.
    pub output_horizon: f64,
    pub goal_tolerance: f64,
    pub finean_trajectory_weight: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            global_edge_duration: 1.0,
            global_max_expansions: 300,
            mpc_steps: 20,
            mpc_dt: 0.1,
            mpc_iterations: 200,
            local_duration: 2.0,
            local_samples: 16,
            safety_margin: 0.1,
            prediction_horizon: 3.0,
            output_horizon: 2.0,
            goal_tolerance: 1.0,
            finean_trajectory_weight: 0.7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlannerKind {
    GlobalPrimitive,
    Mpc,
    LocalPrimitive,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [
        PlannerKind::GlobalPrimitive,
        PlannerKind::Mpc,
        PlannerKind::LocalPrimitive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::GlobalPrimitive => "global-primitive",
            PlannerKind::Mpc => "mpc",
            PlannerKind::LocalPrimitive => "local-primitive",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown planner {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanKind {
    Trajectory,
    Brake,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanOutcome {
    pub kind: PlanKind,
    /// The trajectory to execute; the braking profile when `kind` is `Brake`.
    pub trajectory: Trajectory,
    pub yaw_rate: f64,
}

impl PlanOutcome {
    pub fn trajectory(trajectory: Trajectory) -> Self {
        PlanOutcome {
            kind: PlanKind::Trajectory,
            trajectory,
            yaw_rate: 0.0,
        }
    }

    pub fn brake(state: &RobotState, cfg: &RobotConfig) -> Self {
        PlanOutcome {
            kind: PlanKind::Brake,
            trajectory: Trajectory::braking(state, cfg.a_max),
            yaw_rate: 0.0,
        }
    }

    pub fn is_brake(&self) -> bool {
        self.kind == PlanKind::Brake
    }
}

/// Common interface so the harness can drive any planner.
pub trait TrajectoryPlanner {
    fn plan(
        &mut self,
        frame: &PerceptionFrame,
        state: &RobotState,
        goal: Vec2,
        cfg: &RobotConfig,
    ) -> PlanOutcome;
}

/// Builds the planner identified by `kind` with the given parameters.
pub fn make_planner(kind: PlannerKind, params: PlannerParams) -> Box<dyn TrajectoryPlanner + Send> {
    match kind {
        PlannerKind::GlobalPrimitive => Box::new(GlobalPrimitivePlanner::new(params)),
        PlannerKind::Mpc => Box::new(MpcPlanner::new(params)),
        PlannerKind::LocalPrimitive => Box::new(LocalPrimitivePlanner::new(params)),
    }
}

/// A disc predicted to move with constant velocity.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MovingDisc {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// The planners' collision model: tracked obstacles under constant-velocity
/// prediction plus static discs for occupied cells that no visible track
/// accounts for. Unexplored cells are free.
#[derive(Clone, Debug)]
pub(crate) struct ObstacleField {
    pub moving: Vec<MovingDisc>,
    pub fixed: Vec<(Vec2, f64)>,
    pub robot_radius: f64,
    pub margin: f64,
    pub horizon: f64,
    pub bounds: Bounds,
}

impl ObstacleField {
    pub fn from_frame(frame: &PerceptionFrame, cfg: &RobotConfig, params: &PlannerParams) -> Self {
        let moving: Vec<MovingDisc> = frame
            .trackers
            .iter()
            .map(|t| MovingDisc {
                position: t.position,
                velocity: t.velocity,
                radius: t.radius,
            })
            .collect();
        let grid = &frame.grid;
        let cell_radius = grid.resolution * std::f64::consts::FRAC_1_SQRT_2;
        let visible: Vec<_> = frame.trackers.iter().filter(|t| t.visible_now).collect();
        let fixed = grid
            .iter()
            .filter(|&(_, _, s, t)| s == CellState::Occupied && t >= frame.time)
            .map(|(c, r, _, _)| grid.center(c, r))
            .filter(|&p| {
                !visible
                    .iter()
                    .any(|t| p.distance(t.position) <= t.radius + 2.0 * cell_radius)
            })
            .map(|p| (p, cell_radius))
            .collect();
        ObstacleField {
            moving,
            fixed,
            robot_radius: cfg.radius,
            margin: params.safety_margin,
            horizon: params.prediction_horizon,
            bounds: frame.grid_bounds(),
        }
    }

    /// Keeps only obstacles that can come within `reach` of `center` during
    /// the prediction horizon.
    pub fn restrict(&mut self, center: Vec2, reach: f64) {
        let h = self.horizon;
        let pad = self.robot_radius + self.margin;
        self.moving.retain(|m| {
            let start = m.position - center;
            let end = start + m.velocity * h;
            crate::geometry::point_segment_distance(Vec2::ZERO, start, end) <= reach + m.radius + pad
        });
        self.fixed
            .retain(|&(p, r)| p.distance(center) <= reach + r + pad);
    }

    /// Signed clearance (centre distance minus radii) of the robot at `p`
    /// and time `t`, against all obstacles; obstacles are ignored beyond the
    /// prediction horizon.
    #[inline]
    pub fn clearance(&self, p: Vec2, t: f64) -> f64 {
        let mut best = f64::INFINITY;
        if t <= self.horizon {
            for m in &self.moving {
                let d = (m.position + m.velocity * t).distance(p) - m.radius - self.robot_radius;
                best = best.min(d);
            }
        }
        for &(c, r) in &self.fixed {
            best = best.min(c.distance(p) - r - self.robot_radius);
        }
        best
    }

    #[inline]
    pub fn is_free(&self, p: Vec2, t: f64) -> bool {
        self.clearance(p, t) >= self.margin && self.bounds.contains_disc(p, self.robot_radius)
    }

    /// True when every sample of the trajectory is collision-free and inside
    /// the map under this model (used for planner self-checks).
    pub fn trajectory_is_free(&self, traj: &Trajectory) -> bool {
        traj.samples.iter().all(|s| self.is_free(s.position, s.t))
    }
}

impl PerceptionFrame {
    pub(crate) fn grid_bounds(&self) -> Bounds {
        Bounds::new(
            self.grid.cols as f64 * self.grid.resolution,
            self.grid.rows as f64 * self.grid.resolution,
        )
    }
}

/// Clearance of a trajectory against the frame's trackers under constant
/// velocity propagation, without margin or horizon truncation.
pub fn predicted_min_clearance(traj: &Trajectory, frame: &PerceptionFrame, robot_radius: f64, horizon: f64) -> f64 {
    traj.samples
        .iter()
        .filter(|s| s.t <= horizon)
        .flat_map(|s| {
            frame.trackers.iter().map(move |t| {
                t.predict_position(s.t).distance(s.position) - t.radius - robot_radius
            })
        })
        .fold(f64::INFINITY, f64::min)
}
