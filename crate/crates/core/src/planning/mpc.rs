//! Receding-horizon planner solved by projected gradient descent on a
//! penalty formulation.
//!
//! Decision variables are the accelerations `u_k` of `N` steps of a double
//! integrator. The cost is `sum |p_k - goal|^2 + w_u sum |u_k|^2` plus
//! quadratic penalties for violating the separation to constant-velocity
//! obstacle predictions and the map boundary. Accelerations are projected onto
//! the `a_max` ball and velocities are saturated at cruise speed during the
//! rollout. A solution that still violates a separation constraint after the
//! iteration budget is rejected and the planner brakes.

use super::{
    ObstacleField, PlanOutcome, PlannerParams, RobotConfig, RobotState, Trajectory,
    TrajectoryPlanner, TRAJECTORY_DT,
};
use crate::geometry::Vec2;
use crate::perception::PerceptionFrame;

const CONTROL_WEIGHT: f64 = 0.05;
const PENALTY_WEIGHT: f64 = 1e4;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;

#[derive(Clone, Debug)]
pub struct MpcPlanner {
    params: PlannerParams,
    warm: Option<(f64, Vec<Vec2>)>,
}

struct Problem<'a> {
    p0: Vec2,
    v0: Vec2,
    goal: Vec2,
    h: f64,
    a_max: f64,
    v_max: f64,
    separation: f64,
    field: &'a ObstacleField,
}

struct Rollout {
    positions: Vec<Vec2>,
    velocities: Vec<Vec2>,
}

impl Problem<'_> {
    fn rollout(&self, u: &[Vec2]) -> Rollout {
        let n = u.len();
        let mut positions = Vec::with_capacity(n + 1);
        let mut velocities = Vec::with_capacity(n + 1);
        let (mut p, mut v) = (self.p0, self.v0);
        positions.push(p);
        velocities.push(v);
        for &uk in u {
            let v_next = (v + uk * self.h).clamp_norm(self.v_max);
            let a = (v_next - v) / self.h;
            p += v * self.h + a * (0.5 * self.h * self.h);
            v = v_next;
            positions.push(p);
            velocities.push(v);
        }
        Rollout { positions, velocities }
    }

    /// Cost and its gradient with respect to the positions `p_1..p_N`.
    fn cost(&self, u: &[Vec2], r: &Rollout, grad_p: Option<&mut [Vec2]>) -> f64 {
        let mut cost = 0.0;
        let mut grads = grad_p;
        let b = self.field.bounds;
        let rr = self.field.robot_radius;
        for k in 1..r.positions.len() {
            let p = r.positions[k];
            let t = k as f64 * self.h;
            let e = p - self.goal;
            cost += e.norm_sq();
            let mut g = e * 2.0;
            if t <= self.field.horizon {
                for m in &self.field.moving {
                    let c = m.position + m.velocity * t;
                    let need = self.separation + m.radius;
                    let d = p - c;
                    let dist = d.norm();
                    if dist < need {
                        let viol = need - dist;
                        cost += PENALTY_WEIGHT * viol * viol;
                        if dist > 1e-12 {
                            g -= d * (2.0 * PENALTY_WEIGHT * viol / dist);
                        }
                    }
                }
            }
            for &(c, radius) in &self.field.fixed {
                let need = self.separation + radius;
                let d = p - c;
                let dist = d.norm();
                if dist < need {
                    let viol = need - dist;
                    cost += PENALTY_WEIGHT * viol * viol;
                    if dist > 1e-12 {
                        g -= d * (2.0 * PENALTY_WEIGHT * viol / dist);
                    }
                }
            }
            for (coord, lo, hi, axis) in [(p.x, rr, b.width - rr, 0), (p.y, rr, b.height - rr, 1)] {
                let viol = if coord < lo { coord - lo } else if coord > hi { coord - hi } else { 0.0 };
                if viol != 0.0 {
                    cost += PENALTY_WEIGHT * viol * viol;
                    let dv = 2.0 * PENALTY_WEIGHT * viol;
                    if axis == 0 {
                        g.x += dv;
                    } else {
                        g.y += dv;
                    }
                }
            }
            if let Some(gp) = grads.as_deref_mut() {
                gp[k - 1] = g;
            }
        }
        cost + CONTROL_WEIGHT * u.iter().map(|x| x.norm_sq()).sum::<f64>()
    }

    /// Gradient w.r.t. the controls, treating velocity saturation as inactive.
    fn gradient(&self, u: &[Vec2], grad_p: &[Vec2], out: &mut [Vec2]) {
        let n = u.len();
        let h2 = self.h * self.h;
        // p_k depends on u_j (j < k) with weight (k - j - 1/2) h^2
        let mut s1 = Vec2::ZERO;
        let mut s2 = Vec2::ZERO;
        for j in (0..n).rev() {
            let k = j + 1;
            s1 += grad_p[k - 1];
            s2 += grad_p[k - 1] * k as f64;
            out[j] = (s2 - s1 * (j as f64 + 0.5)) * h2 + u[j] * (2.0 * CONTROL_WEIGHT);
        }
    }

    fn project(&self, u: &mut [Vec2]) {
        for x in u.iter_mut() {
            *x = x.clamp_norm(self.a_max);
        }
    }

    fn solve(&self, mut u: Vec<Vec2>, iterations: usize) -> (Vec<Vec2>, f64) {
        self.project(&mut u);
        let n = u.len();
        let mut grad_p = vec![Vec2::ZERO; n];
        let mut grad = vec![Vec2::ZERO; n];
        let mut r = self.rollout(&u);
        let mut f = self.cost(&u, &r, Some(&mut grad_p));
        let mut step = 1.0;
        let mut trial = vec![Vec2::ZERO; n];
        for _ in 0..iterations {
            self.gradient(&u, &grad_p, &mut grad);
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                for j in 0..n {
                    trial[j] = (u[j] - grad[j] * step).clamp_norm(self.a_max);
                }
                let decrease: f64 = trial
                    .iter()
                    .zip(&u)
                    .zip(&grad)
                    .map(|((t, x), g)| g.dot(*x - *t))
                    .sum();
                let tr = self.rollout(&trial);
                let ft = self.cost(&trial, &tr, None);
                if ft <= f - ARMIJO * decrease && ft < f {
                    u.copy_from_slice(&trial);
                    r = tr;
                    f = self.cost(&u, &r, Some(&mut grad_p));
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            step *= 2.0;
        }
        (u, f)
    }

    /// Whether the rolled-out plan keeps the hard separation at every step.
    fn feasible(&self, u: &[Vec2]) -> bool {
        let r = self.rollout(u);
        r.positions.iter().enumerate().skip(1).all(|(k, &p)| {
            let t = k as f64 * self.h;
            self.field.clearance(p, t) >= 0.0 && self.field.bounds.contains_disc(p, self.field.robot_radius)
        })
    }
}

impl MpcPlanner {
    pub fn new(params: PlannerParams) -> Self {
        MpcPlanner { params, warm: None }
    }

    fn to_trajectory(&self, prob: &Problem<'_>, u: &[Vec2]) -> Trajectory {
        let r = prob.rollout(u);
        let sub = (prob.h / TRAJECTORY_DT).round().max(1.0) as usize;
        let accels: Vec<Vec2> = (0..u.len())
            .flat_map(|k| {
                let a = (r.velocities[k + 1] - r.velocities[k]) / prob.h;
                std::iter::repeat_n(a, sub)
            })
            .collect();
        Trajectory::from_accelerations(prob.p0, prob.v0, &accels)
    }
}

impl TrajectoryPlanner for MpcPlanner {
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
        let n = p.mpc_steps;
        let h = p.mpc_dt;
        let mut field = ObstacleField::from_frame(frame, cfg, &p);
        field.horizon = field.horizon.min(n as f64 * h);
        field.restrict(state.position, cfg.v_cruise * n as f64 * h);
        let prob = Problem {
            p0: state.position,
            v0: state.velocity,
            goal,
            h,
            a_max: cfg.a_max,
            v_max: cfg.v_cruise,
            separation: cfg.radius + p.safety_margin,
            field: &field,
        };

        let toward = (goal - state.position).normalized();
        let mut seeds: Vec<Vec<Vec2>> = Vec::with_capacity(3);
        let mut warm = vec![toward * cfg.a_max; n];
        if let Some((t_prev, prev)) = &self.warm {
            let shift = ((state.time - t_prev) / h).round().max(0.0) as usize;
            for (k, slot) in warm.iter_mut().enumerate() {
                if let Some(&x) = prev.get(k + shift) {
                    *slot = x;
                }
            }
        }
        seeds.push(warm);
        if !field.moving.is_empty() || !field.fixed.is_empty() {
            let side = toward.perp();
            for sign in [1.0, -1.0] {
                seeds.push(
                    (0..n)
                        .map(|k| if k < n / 2 { (side * sign).normalized() * cfg.a_max } else { toward * cfg.a_max })
                        .collect(),
                );
            }
        }

        let mut best: Option<(Vec<Vec2>, f64)> = None;
        for seed in seeds {
            let (u, f) = prob.solve(seed, p.mpc_iterations);
            if prob.feasible(&u) && best.as_ref().is_none_or(|(_, bf)| f < *bf) {
                best = Some((u, f));
                // the warm start is usually good enough
                break;
            }
        }
        let Some((u, _)) = best else {
            self.warm = None;
            return PlanOutcome::brake(state, cfg);
        };
        let mut traj = self.to_trajectory(&prob, &u);
        traj.truncate(p.output_horizon);
        let check = ObstacleField::from_frame(frame, cfg, &PlannerParams { safety_margin: 0.0, ..p });
        if traj.max_acceleration() > cfg.a_max + 1e-9 || !check.trajectory_is_free(&traj) {
            self.warm = None;
            return PlanOutcome::brake(state, cfg);
        }
        self.warm = Some((state.time, u));
        PlanOutcome::trajectory(traj)
    }
}

/// Plans with default parameters and no warm start.
pub fn plan_mpc(frame: &PerceptionFrame, state: &RobotState, goal: Vec2, cfg: &RobotConfig) -> PlanOutcome {
    MpcPlanner::new(PlannerParams::default()).plan(frame, state, goal, cfg)
}
