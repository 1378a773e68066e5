//! Closed-loop trials: world stepping, sensing, planning and execution, plus
//! the parallel trial matrix and its success-rate aggregation.

mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::collision::{substep_time, SUBSTEPS};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::perception::{sense_in_place, FieldOfView, PerceptionFrame};
use crate::planning::{
    make_planner, plan_gaze, GazePolicy, PlanOutcome, PlannerKind, RobotConfig, RobotState,
    TrajectoryPlanner,
};
use crate::world::{DynamicMap, World};

pub use io::{read_results, read_success, write_results, write_success};

/// Start and goal candidates: a 3x3 grid over the 50 m map.
pub const CANONICAL_COORDS: [f64; 3] = [10.0, 25.0, 40.0];

pub fn canonical_positions() -> Vec<Vec2> {
    CANONICAL_COORDS
        .iter()
        .flat_map(|&x| CANONICAL_COORDS.iter().map(move |&y| Vec2::new(x, y)))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSpec {
    pub map_id: String,
    pub planner: PlannerKind,
    pub gaze: GazePolicy,
    pub start: Vec2,
    pub goal: Vec2,
    pub v_cruise: f64,
    pub time_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Success,
    Collision,
    Deadlock,
    Timeout,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Success => "Success",
            Outcome::Collision => "Collision",
            Outcome::Deadlock => "Deadlock",
            Outcome::Timeout => "Timeout",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Success" => Outcome::Success,
            "Collision" => Outcome::Collision,
            "Deadlock" => Outcome::Deadlock,
            "Timeout" => Outcome::Timeout,
            _ => return Err(Error::Parse(format!("unknown outcome {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: TrialSpec,
    pub outcome: Outcome,
    pub duration: f64,
    /// Smallest centre distance minus radii over every checked substep.
    pub min_clearance: f64,
    pub replan_count: u32,
}

/// The 216-trial matrix of one map and planner-gaze pair: ordered start/goal
/// pairs of the canonical positions times the trial speeds.
pub fn trial_matrix(map_id: &str, planner: PlannerKind, gaze: GazePolicy, cfg: &RunConfig) -> Vec<TrialSpec> {
    let positions = canonical_positions();
    let mut out = Vec::with_capacity(cfg.trial_speeds.len() * positions.len() * (positions.len() - 1));
    for &v in &cfg.trial_speeds {
        for &s in &positions {
            for &g in &positions {
                if s != g {
                    out.push(TrialSpec {
                        map_id: map_id.to_string(),
                        planner,
                        gaze,
                        start: s,
                        goal: g,
                        v_cruise: v,
                        time_limit: cfg.time_limit,
                    });
                }
            }
        }
    }
    out
}

/// Runs one trial with the planner named in the spec.
pub fn run_trial(spec: &TrialSpec, map: &Arc<DynamicMap>, cfg: &RunConfig) -> TrialRecord {
    let mut planner = make_planner(spec.planner, cfg.planner_params());
    run_trial_with(spec, map, cfg, planner.as_mut())
}

fn clearance(world: &World, p: Vec2, radius: f64) -> f64 {
    world
        .obstacles
        .iter()
        .map(|o| o.position.distance(p) - o.radius - radius)
        .fold(f64::INFINITY, f64::min)
}

/// Runs one trial with a caller-supplied planner (used for stubs in tests).
pub fn run_trial_with(
    spec: &TrialSpec,
    map: &Arc<DynamicMap>,
    cfg: &RunConfig,
    planner: &mut dyn TrajectoryPlanner,
) -> TrialRecord {
    let mut robot: RobotConfig = cfg.robot(spec.v_cruise);
    robot.fov_width = spec.gaze.fov_width(&robot);
    let dt = cfg.dt;
    let goal = spec.goal;
    let fov_of = |s: &RobotState| FieldOfView {
        center: s.position,
        heading: s.heading,
        angular_width: robot.fov_width,
        depth: robot.fov_depth,
    };
    let record = |outcome, duration, min_clearance, replan_count| TrialRecord {
        trial: spec.clone(),
        outcome,
        duration,
        min_clearance,
        replan_count,
    };

    let mut world = map.initial_world();
    let heading = (goal - spec.start).angle();
    let mut state = RobotState::at_rest(spec.start, heading);
    let mut frame = PerceptionFrame::empty(map.bounds, cfg.grid_resolution, fov_of(&state));
    let mut min_clearance = clearance(&world, state.position, robot.radius);
    if min_clearance < 0.0 {
        return record(Outcome::Collision, 0.0, min_clearance, 0);
    }
    if state.position.distance(goal) <= cfg.goal_tolerance {
        return record(Outcome::Success, 0.0, min_clearance, 0);
    }
    sense_in_place(&mut frame, &world, fov_of(&state), 0.0);

    let replan_ticks = (cfg.replan_interval / dt).round().max(1.0) as u64;
    let mut plan: Option<PlanOutcome> = None;
    let mut plan_tick = 0u64;
    let mut brakes = 0u32;
    let mut replans = 0u32;
    let mut prev_positions: Vec<Vec2> = Vec::with_capacity(world.obstacles.len());
    let mut tick = 0u64;
    loop {
        let due = match &plan {
            None => true,
            Some(p) => p.is_brake() || tick - plan_tick >= replan_ticks,
        };
        if due {
            let mut out = planner.plan(&frame, &state, goal, &robot);
            replans += 1;
            out.yaw_rate = plan_gaze(spec.gaze, &frame, &state, &out.trajectory, goal, &robot);
            if out.is_brake() {
                brakes += 1;
                if brakes >= cfg.deadlock_brakes {
                    return record(Outcome::Deadlock, state.time, min_clearance, replans);
                }
            } else {
                brakes = 0;
            }
            plan = Some(out);
            plan_tick = tick;
        }
        let current = plan.as_ref().expect("a plan exists after replanning");
        let k = tick - plan_tick;

        prev_positions.clear();
        prev_positions.extend(world.obstacles.iter().map(|o| o.position));
        world.advance(dt);

        for sub in 1..=SUBSTEPS {
            let f = sub as f64 / SUBSTEPS as f64;
            let (p, _) = current.trajectory.state_at((k as f64 + f) * dt);
            let mut hit = false;
            for (o, &p0) in world.obstacles.iter().zip(&prev_positions) {
                let c = p0.lerp(o.position, f);
                let d = c.distance(p) - o.radius - robot.radius;
                min_clearance = min_clearance.min(d);
                hit |= d < 0.0;
            }
            if hit {
                return record(Outcome::Collision, substep_time(tick, sub, dt), min_clearance, replans);
            }
        }

        let (p, v) = current.trajectory.state_at((k + 1) as f64 * dt);
        state = RobotState {
            position: p,
            velocity: v,
            heading: wrap_angle(state.heading + current.yaw_rate * dt),
            time: substep_time(tick + 1, 0, dt),
        };
        tick += 1;
        if state.position.distance(goal) <= cfg.goal_tolerance {
            return record(Outcome::Success, state.time, min_clearance, replans);
        }
        if state.time >= spec.time_limit - 1e-9 {
            return record(Outcome::Timeout, state.time, min_clearance, replans);
        }
        sense_in_place(&mut frame, &world, fov_of(&state), dt);
    }
}

/// A trial that could not be run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub trial: TrialSpec,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct MatrixReport {
    /// Records in matrix order (map, pair, speed, start, goal).
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl MatrixReport {
    pub fn table(&self) -> SuccessTable {
        SuccessTable::from_records(&self.records)
    }
}

/// Runs the full matrix of `maps` x `pairs` on a pool of `jobs` threads.
/// Output order and content do not depend on `jobs`.
pub fn run_matrix(
    maps: &[Arc<DynamicMap>],
    pairs: &[(PlannerKind, GazePolicy)],
    cfg: &RunConfig,
    jobs: usize,
) -> Result<MatrixReport> {
    if jobs == 0 {
        return Err(Error::invalid("parallelism must be at least 1"));
    }
    let trials: Vec<(usize, TrialSpec)> = maps
        .iter()
        .enumerate()
        .flat_map(|(i, m)| {
            pairs
                .iter()
                .flat_map(move |&(p, g)| trial_matrix(&m.id, p, g, cfg).into_iter().map(move |t| (i, t)))
        })
        .collect();
    let total = trials.len();
    let done = AtomicUsize::new(0);
    let step = (total / 20).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<TrialRecord, TrialFailure>> = pool.install(|| {
        trials
            .par_iter()
            .map(|(i, spec)| {
                let out = catch_unwind(AssertUnwindSafe(|| run_trial(spec, &maps[*i], cfg)));
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if n.is_multiple_of(step) || n == total {
                    log::info!("trials {n}/{total}");
                }
                out.map_err(|e| TrialFailure {
                    trial: spec.clone(),
                    message: panic_message(e),
                })
            })
            .collect()
    });
    let mut report = MatrixReport::default();
    for r in results {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "trial panicked".into()
    }
}

/// Planner-gaze pair identifier.
pub type PairId = (PlannerKind, GazePolicy);

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SuccessCell {
    pub successes: u32,
    pub trials: u32,
}

impl SuccessCell {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

/// Success rate per map and planner-gaze pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuccessTable {
    pub cells: BTreeMap<(String, PairId), SuccessCell>,
}

impl SuccessTable {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let mut cells: BTreeMap<(String, PairId), SuccessCell> = BTreeMap::new();
        for r in records {
            let cell = cells
                .entry((r.trial.map_id.clone(), (r.trial.planner, r.trial.gaze)))
                .or_default();
            cell.trials += 1;
            if r.outcome == Outcome::Success {
                cell.successes += 1;
            }
        }
        SuccessTable { cells }
    }

    pub fn pairs(&self) -> Vec<PairId> {
        let mut v: Vec<PairId> = self.cells.keys().map(|(_, p)| *p).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn maps(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cells.keys().map(|(m, _)| m.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn rate(&self, map_id: &str, pair: PairId) -> Option<f64> {
        self.cells.get(&(map_id.to_string(), pair)).map(SuccessCell::rate)
    }
}

#[cfg(test)]
mod tests;
