//! Limited field-of-view sensing: ray casting into a tri-state occupancy grid
//! and ground-truth-snapped Kalman tracks of the obstacles in view.

mod grid;
mod tracker;

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{ray_disc_entry, Bounds, Vec2};
use crate::world::World;

pub use grid::{CellState, OccupancyGrid};
pub use tracker::{kf_predict, TrackedObstacle, PROCESS_NOISE_POS, PROCESS_NOISE_VEL, RESET_VARIANCE};

/// Angular spacing of the simulated rays.
pub const RAY_RESOLUTION: f64 = 0.5 * std::f64::consts::PI / 180.0;
pub const DEFAULT_GRID_RESOLUTION: f64 = 0.5;
pub const DEFAULT_FOV_DEPTH: f64 = 8.0;
const FULL_CIRCLE_RAYS: usize = 720;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldOfView {
    pub center: Vec2,
    pub heading: f64,
    pub angular_width: f64,
    pub depth: f64,
}

impl FieldOfView {
    /// A camera-like wedge of 90 degrees or an omnidirectional 360 degree view.
    pub fn new(center: Vec2, heading: f64, angular_width: f64, depth: f64) -> Result<Self> {
        let ok_width = (angular_width - FRAC_PI_2).abs() < 1e-12 || (angular_width - TAU).abs() < 1e-12;
        if !ok_width || !(depth > 0.0) {
            return Err(Error::invalid(format!(
                "field of view must be 90 or 360 degrees with positive depth (got {angular_width} rad, {depth} m)"
            )));
        }
        Ok(FieldOfView { center, heading, angular_width, depth })
    }

    pub fn full(center: Vec2, depth: f64) -> Self {
        FieldOfView { center, heading: 0.0, angular_width: TAU, depth }
    }

    pub fn wedge(center: Vec2, heading: f64, depth: f64) -> Self {
        FieldOfView { center, heading, angular_width: FRAC_PI_2, depth }
    }

    pub fn is_full(&self) -> bool {
        self.angular_width >= TAU - 1e-9
    }

    /// Bearing of the first ray and number of rays.
    fn fan(&self) -> (f64, usize) {
        if self.is_full() {
            (self.heading, FULL_CIRCLE_RAYS)
        } else {
            let n = (self.angular_width / RAY_RESOLUTION).round() as usize + 1;
            (self.heading - self.angular_width / 2.0, n)
        }
    }

    /// Whether the bearing `angle` lies within the wedge.
    pub fn contains_bearing(&self, angle: f64) -> bool {
        self.is_full() || ray_index(angle, self.fan()).is_some()
    }
}

/// Unit directions of the rays of a fan starting at bearing 0.
fn ray_table() -> &'static [Vec2] {
    static TABLE: OnceLock<Vec<Vec2>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..FULL_CIRCLE_RAYS)
            .map(|k| Vec2::from_angle(k as f64 * RAY_RESOLUTION))
            .collect()
    })
}

/// Index of the ray closest to `angle` in a fan, if inside it.
#[inline]
fn ray_index(angle: f64, (start, n): (f64, usize)) -> Option<usize> {
    let rel = (angle - start).rem_euclid(TAU);
    let k = (rel / RAY_RESOLUTION).round() as usize % FULL_CIRCLE_RAYS;
    (k < n).then_some(k)
}

/// Everything the robot knows at one instant.
#[derive(Clone, Debug)]
pub struct PerceptionFrame {
    pub grid: OccupancyGrid,
    /// Sorted by obstacle id, at most one per id.
    pub trackers: Vec<TrackedObstacle>,
    pub fov: FieldOfView,
    pub time: f64,
}

impl PerceptionFrame {
    /// Frame before any observation: all cells unexplored, no tracks.
    pub fn empty(bounds: Bounds, resolution: f64, fov: FieldOfView) -> Self {
        PerceptionFrame {
            grid: OccupancyGrid::new(bounds, resolution),
            trackers: Vec::new(),
            fov,
            time: 0.0,
        }
    }

    pub fn tracker(&self, id: u32) -> Option<&TrackedObstacle> {
        self.trackers
            .binary_search_by_key(&id, |t| t.id)
            .ok()
            .map(|i| &self.trackers[i])
    }
}

/// Result of casting the ray fan against the obstacles of a world.
#[derive(Clone, Debug)]
pub struct RayCast {
    start: f64,
    lengths: Vec<f64>,
    /// Index into `world.obstacles` of the disc each ray terminated on.
    hits: Vec<Option<usize>>,
}

impl RayCast {
    pub fn new(world: &World, fov: &FieldOfView) -> Self {
        let (start, n) = fov.fan();
        let mut lengths = vec![fov.depth; n];
        let mut hits = vec![None; n];
        let table = ray_table();
        let rot = Vec2::from_angle(start);
        let origin = fov.center;
        for (j, o) in world.obstacles.iter().enumerate() {
            let rel = o.position - origin;
            let d = rel.norm();
            if d - o.radius > fov.depth {
                continue;
            }
            if d <= o.radius {
                lengths.iter_mut().for_each(|l| *l = 0.0);
                hits.iter_mut().for_each(|h| *h = Some(j));
                continue;
            }
            let half = (o.radius / d).asin();
            let lo = (rel.angle() - half - start).rem_euclid(TAU);
            let k_lo = (lo / RAY_RESOLUTION).ceil() as usize;
            let k_hi = ((lo + 2.0 * half) / RAY_RESOLUTION).floor() as usize;
            for k in k_lo..=k_hi {
                let idx = k % FULL_CIRCLE_RAYS;
                if idx >= n {
                    continue;
                }
                let u = table[idx];
                let dir = Vec2::new(rot.x * u.x - rot.y * u.y, rot.y * u.x + rot.x * u.y);
                if let Some(t) = ray_disc_entry(origin, dir, o.position, o.radius) {
                    if t < lengths[idx] {
                        lengths[idx] = t;
                        hits[idx] = Some(j);
                    }
                }
            }
        }
        RayCast { start, lengths, hits }
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// Indices of obstacles on which at least one ray terminated.
    pub fn visible(&self, n_obstacles: usize) -> Vec<bool> {
        let mut seen = vec![false; n_obstacles];
        for j in self.hits.iter().flatten() {
            seen[*j] = true;
        }
        seen
    }

    fn direction(&self, k: usize) -> Vec2 {
        Vec2::from_angle(self.start + k as f64 * RAY_RESOLUTION)
    }
}

/// Pure sensing step: derives the next frame from `prev` and the world.
pub fn sense(world: &World, fov: FieldOfView, prev: &PerceptionFrame, dt: f64) -> PerceptionFrame {
    let mut frame = prev.clone();
    sense_in_place(&mut frame, world, fov, dt);
    frame
}

/// In-place variant of [`sense`]; `dt` may be zero for the very first
/// observation.
pub fn sense_in_place(frame: &mut PerceptionFrame, world: &World, fov: FieldOfView, dt: f64) {
    let cast = RayCast::new(world, &fov);
    let time = world.time;
    update_grid(&mut frame.grid, &cast, &fov, time);

    let visible = cast.visible(world.obstacles.len());
    if dt > 0.0 {
        for t in &mut frame.trackers {
            *t = kf_predict(t, dt);
        }
    } else {
        frame.trackers.iter_mut().for_each(|t| t.visible_now = false);
    }
    for (o, _) in world.obstacles.iter().zip(&visible).filter(|(_, &v)| v) {
        match frame.trackers.binary_search_by_key(&o.id, |t| t.id) {
            Ok(i) => frame.trackers[i].snap(o.position, o.velocity, o.radius, time),
            Err(i) => frame.trackers.insert(
                i,
                TrackedObstacle::observed(o.id, o.position, o.velocity, o.radius, time),
            ),
        }
    }
    frame.fov = fov;
    frame.time = time;
}

fn update_grid(grid: &mut OccupancyGrid, cast: &RayCast, fov: &FieldOfView, time: f64) {
    let res = grid.resolution;
    let c = fov.center;
    let depth = fov.depth;
    let fan = fov.fan();
    let col_lo = ((c.x - depth) / res).floor().max(0.0) as usize;
    let row_lo = ((c.y - depth) / res).floor().max(0.0) as usize;
    let col_hi = (((c.x + depth) / res).ceil().max(0.0) as usize).min(grid.cols);
    let row_hi = (((c.y + depth) / res).ceil().max(0.0) as usize).min(grid.rows);
    let depth_sq = depth * depth;
    for row in row_lo..row_hi {
        let dy = (row as f64 + 0.5) * res - c.y;
        for col in col_lo..col_hi {
            let dx = (col as f64 + 0.5) * res - c.x;
            let d_sq = dx * dx + dy * dy;
            if d_sq > depth_sq {
                continue;
            }
            let Some(k) = ray_index(dy.atan2(dx), fan) else {
                continue;
            };
            let len = cast.lengths[k];
            if d_sq < len * len {
                grid.observe(col, row, CellState::Unoccupied, time);
            }
        }
    }
    for (k, hit) in cast.hits.iter().enumerate() {
        if hit.is_some() {
            let p = c + cast.direction(k) * (cast.lengths[k] + 1e-6);
            if let Some((col, row)) = grid.cell_of(p) {
                grid.observe(col, row, CellState::Occupied, time);
            }
        }
    }
}
