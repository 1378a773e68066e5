//! Search over a lattice of constant-acceleration motion primitives.
//!
//! Each primitive lasts `global_edge_duration` seconds and drives the
//! velocity linearly to one of 17 lattice velocities (rest, plus 8 headings
//! at half and full cruise speed). Primitives are pruned against predicted
//! obstacles and the map boundary, and the lattice is searched with A*
//! (cost = time, heuristic = straight-line distance at cruise speed).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::FRAC_PI_4;

use super::{
    ObstacleField, PlanOutcome, PlannerParams, RobotConfig, RobotState, Trajectory,
    TrajectoryPlanner, TRAJECTORY_DT,
};
use crate::geometry::Vec2;
use crate::perception::PerceptionFrame;

const DEDUP_CELL: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct GlobalPrimitivePlanner {
    params: PlannerParams,
}

/// Outcome of one lattice search.
#[derive(Clone, Debug)]
pub struct GlobalSearch {
    /// Acceleration of each primitive along the chosen path.
    pub accelerations: Vec<Vec2>,
    /// Time at which the path enters the goal region, if it does.
    pub arrival_time: Option<f64>,
    pub expansions: usize,
}

struct Node {
    position: Vec2,
    velocity: Vec2,
    g: f64,
    parent: Option<usize>,
    accel: Vec2,
    arrival: Option<f64>,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    seq: usize,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the smallest f pops first.
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl GlobalPrimitivePlanner {
    pub fn new(params: PlannerParams) -> Self {
        GlobalPrimitivePlanner { params }
    }

    fn lattice_velocities(v_cruise: f64) -> Vec<Vec2> {
        let mut out = vec![Vec2::ZERO];
        for speed in [0.5 * v_cruise, v_cruise] {
            for k in 0..8 {
                out.push(Vec2::from_angle(k as f64 * FRAC_PI_4) * speed);
            }
        }
        out
    }

    /// Runs the lattice search. Returns `None` when the reachable lattice is
    /// exhausted without reaching the goal.
    pub fn search(
        &self,
        frame: &PerceptionFrame,
        state: &RobotState,
        goal: Vec2,
        cfg: &RobotConfig,
    ) -> Option<GlobalSearch> {
        let p = &self.params;
        let tau = p.global_edge_duration;
        let steps = (tau / TRAJECTORY_DT).round().max(1.0) as usize;
        let mut field = ObstacleField::from_frame(frame, cfg, p);
        field.restrict(state.position, cfg.v_cruise * p.prediction_horizon);
        let lattice = Self::lattice_velocities(cfg.v_cruise);
        let heuristic = |q: Vec2| q.distance(goal) / cfg.v_cruise;
        let key = |q: Vec2, vi: usize| {
            (
                (q.x / DEDUP_CELL).floor() as i64,
                (q.y / DEDUP_CELL).floor() as i64,
                vi,
            )
        };

        let mut nodes = vec![Node {
            position: state.position,
            velocity: state.velocity,
            g: 0.0,
            parent: None,
            accel: Vec2::ZERO,
            arrival: None,
        }];
        let mut open = BinaryHeap::new();
        let mut seen: HashSet<(i64, i64, usize)> = HashSet::new();
        let mut seq = 0;
        open.push(Open { f: heuristic(state.position), h: heuristic(state.position), seq, node: 0 });
        let mut expansions = 0;
        let mut solution = None;

        while let Some(Open { node: idx, .. }) = open.pop() {
            if nodes[idx].arrival.is_some() {
                solution = Some(idx);
                break;
            }
            if expansions >= p.global_max_expansions {
                break;
            }
            expansions += 1;
            let (p0, v0, g0) = (nodes[idx].position, nodes[idx].velocity, nodes[idx].g);
            let hold = (idx == 0).then_some(v0);
            for (vi, target) in lattice.iter().copied().map(Some).enumerate().chain(std::iter::once((lattice.len(), hold))) {
                let Some(target) = target else { continue };
                let accel = (target - v0) / tau;
                if accel.norm() > cfg.a_max + 1e-9 {
                    continue;
                }
                // simulate the primitive sample by sample
                let mut arrival = None;
                let mut free = true;
                for s in 1..=steps {
                    let t = s as f64 * TRAJECTORY_DT;
                    let q = p0 + v0 * t + accel * (0.5 * t * t);
                    if !field.is_free(q, g0 + t) {
                        free = false;
                        break;
                    }
                    if q.distance(goal) <= p.goal_tolerance {
                        arrival = Some(g0 + t);
                        break;
                    }
                }
                if !free {
                    continue;
                }
                let end = p0 + v0 * tau + accel * (0.5 * tau * tau);
                if arrival.is_none() && !seen.insert(key(end, vi)) {
                    continue;
                }
                let g = arrival.unwrap_or(g0 + tau);
                let h = if arrival.is_some() { 0.0 } else { heuristic(end) };
                nodes.push(Node {
                    position: end,
                    velocity: target,
                    g,
                    parent: Some(idx),
                    accel,
                    arrival,
                });
                seq += 1;
                open.push(Open { f: g + h, h, seq, node: nodes.len() - 1 });
            }
        }

        let chosen = match solution {
            Some(i) => i,
            None if open.is_empty() => return None,
            None => {
                // budget exhausted: head for the generated node nearest the goal
                (1..nodes.len()).min_by(|&a, &b| {
                    heuristic(nodes[a].position)
                        .total_cmp(&heuristic(nodes[b].position))
                        .then(nodes[a].g.total_cmp(&nodes[b].g))
                })?
            }
        };
        let mut accelerations = Vec::new();
        let mut cur = chosen;
        while let Some(parent) = nodes[cur].parent {
            accelerations.push(nodes[cur].accel);
            cur = parent;
        }
        accelerations.reverse();
        Some(GlobalSearch {
            accelerations,
            arrival_time: nodes[chosen].arrival,
            expansions,
        })
    }
}

impl TrajectoryPlanner for GlobalPrimitivePlanner {
    fn plan(
        &mut self,
        frame: &PerceptionFrame,
        state: &RobotState,
        goal: Vec2,
        cfg: &RobotConfig,
    ) -> PlanOutcome {
        let p = &self.params;
        if state.position.distance(goal) <= p.goal_tolerance {
            return PlanOutcome::trajectory(Trajectory::stationary(state));
        }
        let Some(search) = self.search(frame, state, goal, cfg) else {
            return PlanOutcome::brake(state, cfg);
        };
        let steps = (p.global_edge_duration / TRAJECTORY_DT).round().max(1.0) as usize;
        let mut accels: Vec<Vec2> = search
            .accelerations
            .iter()
            .flat_map(|&a| std::iter::repeat_n(a, steps))
            .collect();
        let limit = search
            .arrival_time
            .map_or(p.output_horizon, |t| t.min(p.output_horizon));
        accels.truncate(((limit / TRAJECTORY_DT) + 1e-9).ceil() as usize);
        let traj = Trajectory::from_accelerations(state.position, state.velocity, &accels);
        let field = ObstacleField::from_frame(frame, cfg, p);
        if accels.is_empty() || !field.trajectory_is_free(&traj) {
            return PlanOutcome::brake(state, cfg);
        }
        PlanOutcome::trajectory(traj)
    }
}

/// Plans with the default lattice parameters.
pub fn plan_global_primitive(
    frame: &PerceptionFrame,
    state: &RobotState,
    goal: Vec2,
    cfg: &RobotConfig,
) -> PlanOutcome {
    GlobalPrimitivePlanner::new(PlannerParams::default()).plan(frame, state, goal, cfg)
}
