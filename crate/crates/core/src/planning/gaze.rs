use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RobotConfig, RobotState, Trajectory};
use crate::error::Error;
use crate::geometry::{wrap_angle, Vec2};
use crate::perception::{CellState, PerceptionFrame};

/// Time over which a heading error is closed before clipping.
pub const GAZE_SETTLE_TIME: f64 = 0.2;

const CANDIDATES: usize = 16;
const SECTORS: usize = 16;
/// Cells older than this count as fully stale.
const STALE_CAP: f64 = 5.0;
/// How far along the plan the look-ahead bearing is taken.
const TRAJECTORY_LOOKAHEAD: f64 = 1.0;
const FINEAN_TRAJECTORY_WEIGHT: f64 = 0.7;
const FINEAN_STALE_WEIGHT: f64 = 0.3;
const OWL_WEIGHT: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GazePolicy {
    FullRange,
    LookAhead,
    LookGoal,
    Rotating,
    FineanStyle,
    OwlStyle,
}

impl GazePolicy {
    pub const ALL: [GazePolicy; 6] = [
        GazePolicy::FullRange,
        GazePolicy::LookAhead,
        GazePolicy::LookGoal,
        GazePolicy::Rotating,
        GazePolicy::FineanStyle,
        GazePolicy::OwlStyle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            GazePolicy::FullRange => "full-range",
            GazePolicy::LookAhead => "look-ahead",
            GazePolicy::LookGoal => "look-goal",
            GazePolicy::Rotating => "rotating",
            GazePolicy::FineanStyle => "finean",
            GazePolicy::OwlStyle => "owl",
        }
    }

    /// Angular width of the sensor under this policy.
    pub fn fov_width(&self, cfg: &RobotConfig) -> f64 {
        match self {
            GazePolicy::FullRange => TAU,
            _ => cfg.fov_width,
        }
    }
}

impl fmt::Display for GazePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GazePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        GazePolicy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown gaze policy {s:?}")))
    }
}

fn steer(desired: f64, heading: f64, cfg: &RobotConfig) -> f64 {
    let rate = wrap_angle(desired - heading) / GAZE_SETTLE_TIME;
    rate.clamp(-cfg.yaw_rate_max, cfg.yaw_rate_max)
}

fn align(a: f64, b: f64) -> f64 {
    (1.0 + (a - b).cos()) / 2.0
}

fn bearing_or(v: Vec2, fallback: f64) -> f64 {
    if v.norm() > 1e-9 {
        v.angle()
    } else {
        fallback
    }
}

fn velocity_bearing(state: &RobotState, traj: &Trajectory) -> f64 {
    if state.velocity.norm() > 1e-9 {
        return state.velocity.angle();
    }
    let (_, v) = traj.state_at(TRAJECTORY_LOOKAHEAD.min(traj.horizon));
    bearing_or(v, state.heading)
}

fn goal_bearing(state: &RobotState, goal: Vec2) -> f64 {
    bearing_or(goal - state.position, state.heading)
}

fn trajectory_bearing(state: &RobotState, traj: &Trajectory, goal: Vec2) -> f64 {
    let (p, _) = traj.state_at(TRAJECTORY_LOOKAHEAD.min(traj.horizon));
    let d = p - state.position;
    if d.norm() > 1e-6 {
        d.angle()
    } else {
        goal_bearing(state, goal)
    }
}

/// Mean staleness of the cells within sensing depth, binned by bearing.
/// Unexplored cells count as fully stale; empty sectors too.
fn sector_staleness(frame: &PerceptionFrame, state: &RobotState, cfg: &RobotConfig) -> [f64; SECTORS] {
    let mut sum = [0.0; SECTORS];
    let mut count = [0usize; SECTORS];
    let grid = &frame.grid;
    let depth = cfg.fov_depth;
    let res = grid.resolution;
    let c = state.position;
    let lo_c = ((c.x - depth) / res).floor().max(0.0) as usize;
    let hi_c = (((c.x + depth) / res).ceil().max(0.0) as usize).min(grid.cols);
    let lo_r = ((c.y - depth) / res).floor().max(0.0) as usize;
    let hi_r = (((c.y + depth) / res).ceil().max(0.0) as usize).min(grid.rows);
    for row in lo_r..hi_r {
        for col in lo_c..hi_c {
            let d = grid.center(col, row) - c;
            let dist = d.norm();
            if dist > depth || dist < 1e-9 {
                continue;
            }
            let stale = match grid.get(col, row) {
                CellState::Unexplored => 1.0,
                _ => ((frame.time - grid.last_update(col, row)) / STALE_CAP).clamp(0.0, 1.0),
            };
            let s = sector_of(d.angle());
            sum[s] += stale;
            count[s] += 1;
        }
    }
    let mut out = [1.0; SECTORS];
    for s in 0..SECTORS {
        if count[s] > 0 {
            out[s] = sum[s] / count[s] as f64;
        }
    }
    out
}

fn sector_of(angle: f64) -> usize {
    let a = angle.rem_euclid(TAU);
    ((a / TAU * SECTORS as f64) as usize).min(SECTORS - 1)
}

fn sector_center(s: usize) -> f64 {
    (s as f64 + 0.5) * TAU / SECTORS as f64
}

/// Mean staleness of the sectors whose centres fall inside a wedge.
fn wedge_staleness(sectors: &[f64; SECTORS], heading: f64, width: f64) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (s, &v) in sectors.iter().enumerate() {
        if wrap_angle(sector_center(s) - heading).abs() <= width / 2.0 + 1e-9 {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        sectors[sector_of(heading)]
    } else {
        sum / n as f64
    }
}

/// Share of nearby tracked obstacles (weighted by closeness) that a wedge
/// centred on `heading` would cover.
fn obstacle_coverage(frame: &PerceptionFrame, state: &RobotState, heading: f64, cfg: &RobotConfig) -> f64 {
    let (mut inside, mut total) = (0.0, 0.0);
    for t in &frame.trackers {
        let d = t.position - state.position;
        let dist = d.norm();
        let w = 1.0 / (1.0 + dist);
        total += w;
        if dist <= cfg.fov_depth && wrap_angle(d.angle() - heading).abs() <= cfg.fov_width / 2.0 {
            inside += w;
        }
    }
    if total > 0.0 {
        inside / total
    } else {
        0.0
    }
}

fn best_heading(state: &RobotState, score: impl Fn(f64) -> f64) -> f64 {
    let mut best = (f64::NEG_INFINITY, state.heading);
    for k in 0..CANDIDATES {
        let h = wrap_angle(k as f64 * TAU / CANDIDATES as f64 - PI);
        let s = score(h);
        if s > best.0 + 1e-12 {
            best = (s, h);
        }
    }
    best.1
}

/// Yaw-rate command for the given policy.
pub fn plan_gaze(
    policy: GazePolicy,
    frame: &PerceptionFrame,
    state: &RobotState,
    traj: &Trajectory,
    goal: Vec2,
    cfg: &RobotConfig,
) -> f64 {
    let yaw = match policy {
        GazePolicy::FullRange => 0.0,
        GazePolicy::Rotating => cfg.yaw_rate_max,
        GazePolicy::LookAhead => steer(velocity_bearing(state, traj), state.heading, cfg),
        GazePolicy::LookGoal => steer(goal_bearing(state, goal), state.heading, cfg),
        GazePolicy::FineanStyle => {
            let along = trajectory_bearing(state, traj, goal);
            let sectors = sector_staleness(frame, state, cfg);
            let h = best_heading(state, |h| {
                FINEAN_TRAJECTORY_WEIGHT * align(h, along)
                    + FINEAN_STALE_WEIGHT * wedge_staleness(&sectors, h, cfg.fov_width)
            });
            steer(h, state.heading, cfg)
        }
        GazePolicy::OwlStyle => {
            let vel = velocity_bearing(state, traj);
            let target = goal_bearing(state, goal);
            let sectors = sector_staleness(frame, state, cfg);
            let h = best_heading(state, |h| {
                OWL_WEIGHT
                    * (align(h, vel)
                        + align(h, target)
                        + wedge_staleness(&sectors, h, cfg.fov_width)
                        + obstacle_coverage(frame, state, h, cfg))
            });
            steer(h, state.heading, cfg)
        }
    };
    if yaw.is_finite() {
        yaw.clamp(-cfg.yaw_rate_max, cfg.yaw_rate_max)
    } else {
        0.0
    }
}
