//! Reciprocal collision avoidance for obstacle agents.
//!
//! Each agent builds one half-plane constraint per neighbour in velocity space
//! (taking half of the avoidance effort) and picks the admissible velocity
//! closest to its preferred velocity with a small incremental linear program.
//! The construction follows the RVO2 reference library.

use crate::geometry::Vec2;

const EPS: f64 = 1e-9;

/// Maximum number of neighbours an agent reacts to.
pub const MAX_NEIGHBORS: usize = 10;

#[derive(Clone, Copy, Debug)]
pub struct Agent {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug)]
struct Line {
    point: Vec2,
    direction: Vec2,
}

/// Computes the new velocity of `agents[index]`.
pub fn avoiding_velocity(
    agents: &[Agent],
    index: usize,
    preferred: Vec2,
    max_speed: f64,
    time_horizon: f64,
    neighbor_dist: f64,
    dt: f64,
) -> Vec2 {
    let me = agents[index];
    let mut neighbors: Vec<(f64, usize)> = agents
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .filter_map(|(j, other)| {
            let d2 = (other.position - me.position).norm_sq();
            (d2 < neighbor_dist * neighbor_dist).then_some((d2, j))
        })
        .collect();
    neighbors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    neighbors.truncate(MAX_NEIGHBORS);

    let inv_horizon = 1.0 / time_horizon;
    let lines: Vec<Line> = neighbors
        .iter()
        .map(|&(_, j)| {
            let other = agents[j];
            let rel_pos = other.position - me.position;
            let rel_vel = me.velocity - other.velocity;
            let dist_sq = rel_pos.norm_sq();
            let combined = me.radius + other.radius;
            let combined_sq = combined * combined;

            let (direction, u) = if dist_sq > combined_sq {
                let w = rel_vel - rel_pos * inv_horizon;
                let w_len_sq = w.norm_sq();
                let dot1 = w.dot(rel_pos);
                if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
                    // Project on the cut-off circle.
                    let w_len = w_len_sq.sqrt();
                    let unit_w = w / w_len;
                    (
                        Vec2::new(unit_w.y, -unit_w.x),
                        unit_w * (combined * inv_horizon - w_len),
                    )
                } else {
                    // Project on the nearer leg of the cone.
                    let leg = (dist_sq - combined_sq).sqrt();
                    let direction = if rel_pos.cross(w) > 0.0 {
                        Vec2::new(
                            rel_pos.x * leg - rel_pos.y * combined,
                            rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    } else {
                        -Vec2::new(
                            rel_pos.x * leg + rel_pos.y * combined,
                            -rel_pos.x * combined + rel_pos.y * leg,
                        ) / dist_sq
                    };
                    let dot2 = rel_vel.dot(direction);
                    (direction, direction * dot2 - rel_vel)
                }
            } else {
                // Already overlapping: resolve within one step.
                let inv_dt = 1.0 / dt;
                let w = rel_vel - rel_pos * inv_dt;
                let w_len = w.norm();
                let unit_w = if w_len > 0.0 { w / w_len } else { Vec2::new(1.0, 0.0) };
                (
                    Vec2::new(unit_w.y, -unit_w.x),
                    unit_w * (combined * inv_dt - w_len),
                )
            };
            Line {
                point: me.velocity + u * 0.5,
                direction,
            }
        })
        .collect();

    let mut result = Vec2::ZERO;
    let fail = linear_program2(&lines, max_speed, preferred, false, &mut result);
    if fail < lines.len() {
        linear_program3(&lines, fail, max_speed, &mut result);
    }
    result
}

fn linear_program1(
    lines: &[Line],
    line_no: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let denominator = line.direction.cross(other.direction);
        let numerator = other.direction.cross(line.point - other.point);
        if denominator.abs() <= EPS {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    if direction_opt {
        if opt_velocity.dot(line.direction) > 0.0 {
            *result = line.point + line.direction * t_right;
        } else {
            *result = line.point + line.direction * t_left;
        }
    } else {
        let t = line.direction.dot(opt_velocity - line.point);
        let t = t.clamp(t_left, t_right);
        *result = line.point + line.direction * t;
    }
    true
}

fn linear_program2(
    lines: &[Line],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> usize {
    *result = if direction_opt {
        opt_velocity * radius
    } else if opt_velocity.norm_sq() > radius * radius {
        opt_velocity.normalized() * radius
    } else {
        opt_velocity
    };

    for (i, line) in lines.iter().enumerate() {
        if line.direction.cross(line.point - *result) > 0.0 {
            let previous = *result;
            if !linear_program1(lines, i, radius, opt_velocity, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

fn linear_program3(lines: &[Line], begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].direction.cross(lines[i].point - *result) <= distance {
            continue;
        }
        let mut projected: Vec<Line> = Vec::with_capacity(i);
        for j in 0..i {
            let determinant = lines[i].direction.cross(lines[j].direction);
            let point = if determinant.abs() <= EPS {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.cross(lines[i].point - lines[j].point) / determinant)
            };
            projected.push(Line {
                point,
                direction: (lines[j].direction - lines[i].direction).normalized(),
            });
        }
        let previous = *result;
        let opt = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if linear_program2(&projected, radius, opt, true, result) < projected.len() {
            *result = previous;
        }
        distance = lines[i].direction.cross(lines[i].point - *result);
    }
}
