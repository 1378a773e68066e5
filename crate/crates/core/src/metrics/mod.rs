//! Difficulty metrics computed by replaying a map's obstacle motion, and the
//! normalization that maps them onto a common `[0, 10]` difficulty scale.

mod io;
mod preprocess;
mod timeline;


use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::collision::{substep_time, SUBSTEPS};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{ray_disc_entry, Bounds, Vec2};
use crate::world::{ticks_for, DynamicMap};

pub use io::{read_bounds, read_metrics, write_bounds, write_metrics};
pub use preprocess::{preprocess, preprocess_with, NormBounds};
pub use timeline::{Disc, Timeline};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    ObstacleDensity,
    Traversability,
    DynamicTraversability,
    VoFeasibility,
    Survivability,
    GlobalSurvivability,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::ObstacleDensity,
        Metric::Traversability,
        Metric::DynamicTraversability,
        Metric::VoFeasibility,
        Metric::Survivability,
        Metric::GlobalSurvivability,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::ObstacleDensity => "obstacle_density",
            Metric::Traversability => "traversability",
            Metric::DynamicTraversability => "dynamic_traversability",
            Metric::VoFeasibility => "vo_feasibility",
            Metric::Survivability => "survivability",
            Metric::GlobalSurvivability => "global_survivability",
        }
    }

    /// Metrics whose raw value falls as difficulty rises; their normalized
    /// value is reflected so that every preprocessed metric grows with
    /// difficulty.
    pub fn is_reversed(self) -> bool {
        self != Metric::ObstacleDensity
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown metric {s:?}")))
    }
}

/// Sampling parameters shared by all metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricParams {
    pub dt: f64,
    pub d_sample: f64,
    pub directions: usize,
    pub n_vel: usize,
    pub vo_speed: f64,
    pub time_samples: usize,
    pub t_sample: f64,
    pub start_time_samples: usize,
    pub t_max: f64,
    pub robot_radius: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams::from_config(&RunConfig::default())
    }
}

impl MetricParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        MetricParams {
            dt: cfg.dt,
            d_sample: cfg.d_sample,
            directions: cfg.directions,
            n_vel: cfg.n_vel,
            vo_speed: cfg.vo_speed,
            time_samples: cfg.time_samples,
            t_sample: cfg.t_sample,
            start_time_samples: cfg.start_time_samples,
            t_max: cfg.t_max,
            robot_radius: cfg.robot_radius,
        }
    }

    /// Replay length needed by the time-sampled metrics.
    pub fn horizon(&self) -> f64 {
        let starts = (self.start_time_samples.max(1) - 1) as f64 * self.t_sample + self.t_max;
        let frames = (self.time_samples.max(1) - 1) as f64 * self.t_sample;
        starts.max(frames)
    }

    pub fn lattice(&self, bounds: Bounds) -> SampleLattice {
        SampleLattice::uniform(bounds, self.d_sample)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt", self.dt),
            ("d_sample", self.d_sample),
            ("vo_speed", self.vo_speed),
            ("t_sample", self.t_sample),
            ("t_max", self.t_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.robot_radius.is_finite() && self.robot_radius >= 0.0) {
            return Err(Error::invalid("robot_radius must be non-negative"));
        }
        for (name, v) in [
            ("directions", self.directions),
            ("n_vel", self.n_vel),
            ("time_samples", self.time_samples),
            ("start_time_samples", self.start_time_samples),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Grid of sample positions strictly inside the map.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleLattice {
    pub positions: Vec<Vec2>,
}

impl SampleLattice {
    /// Points `(i * d, j * d)` that lie strictly inside `bounds`.
    pub fn uniform(bounds: Bounds, d: f64) -> Self {
        let axis = |len: f64| -> Vec<f64> {
            (1..)
                .map(|k| k as f64 * d)
                .take_while(|&x| x < len - 1e-9)
                .collect()
        };
        let xs = axis(bounds.width);
        let ys = axis(bounds.height);
        let positions = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| Vec2::new(x, y)))
            .collect();
        SampleLattice { positions }
    }
}

/// Occupied area over map area at `t = 0`.
pub fn obstacle_density(tl: &Timeline) -> f64 {
    let area: f64 = tl.frames[0]
        .iter()
        .map(|d| std::f64::consts::PI * d.radius * d.radius)
        .sum();
    area / tl.bounds.area()
}

fn free_ray(frame: &[Disc], bounds: Bounds, p: Vec2, dir: Vec2) -> f64 {
    frame
        .iter()
        .filter_map(|d| ray_disc_entry(p, dir, d.position, d.radius))
        .fold(bounds.exit_distance(p, dir), f64::min)
}

/// Mean free ray length over the lattice and `directions` evenly spaced
/// bearings, in one frame.
pub fn traversability_in(frame: &[Disc], bounds: Bounds, lattice: &SampleLattice, directions: usize) -> f64 {
    let n = lattice.positions.len() * directions;
    if n == 0 {
        return 0.0;
    }
    let dirs: Vec<Vec2> = (0..directions)
        .map(|k| Vec2::from_angle(std::f64::consts::TAU * k as f64 / directions as f64))
        .collect();
    let total: f64 = lattice
        .positions
        .iter()
        .flat_map(|&p| dirs.iter().map(move |&dir| free_ray(frame, bounds, p, dir)))
        .sum();
    total / n as f64
}

pub fn traversability(tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    traversability_in(&tl.frames[0], tl.bounds, lattice, params.directions)
}

/// Traversability averaged over the frames at `j * t_sample`.
pub fn dynamic_traversability(tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    let m = params.time_samples;
    (0..m)
        .map(|j| {
            let frame = tl.frame_at(j as f64 * params.t_sample);
            traversability_in(frame, tl.bounds, lattice, params.directions)
        })
        .sum::<f64>()
        / m as f64
}

/// Whether velocity `v` of an agent at `p` with radius `r` leads to contact
/// with obstacle `d` at some future time, both moving at constant velocity.
pub fn in_velocity_obstacle(p: Vec2, r: f64, v: Vec2, d: &Disc) -> bool {
    let rel = d.position - p;
    let w = v - d.velocity;
    let reach = r + d.radius;
    if w.norm_sq() == 0.0 {
        return rel.norm_sq() <= reach * reach;
    }
    ray_disc_entry(Vec2::ZERO, w.normalized(), rel, reach).is_some()
}

/// Fraction of the sampled velocities that lie outside every obstacle's
/// velocity obstacle, averaged over the lattice.
pub fn vo_feasibility(tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    if lattice.positions.is_empty() {
        return 1.0;
    }
    let vels: Vec<Vec2> = (0..params.n_vel)
        .map(|k| {
            Vec2::from_angle(std::f64::consts::TAU * k as f64 / params.n_vel as f64) * params.vo_speed
        })
        .collect();
    let frame = &tl.frames[0];
    let total: f64 = lattice
        .positions
        .iter()
        .map(|&p| {
            let free = vels
                .iter()
                .filter(|&&v| !frame.iter().any(|d| in_velocity_obstacle(p, params.robot_radius, v, d)))
                .count();
            free as f64 / vels.len() as f64
        })
        .sum();
    total / lattice.positions.len() as f64
}

/// Contact flags of a static disc at `p` for every sampled instant: index 0
/// is `t = 0`, index `k * SUBSTEPS + s` is substep `s` of tick `k`.
fn contact_flags(tl: &Timeline, p: Vec2, robot_radius: f64) -> Vec<bool> {
    let ticks = tl.frames.len() - 1;
    let mut flags = vec![false; ticks * SUBSTEPS as usize + 1];
    flags[0] = tl.frames[0]
        .iter()
        .any(|d| d.position.distance(p) < d.radius + robot_radius);
    for k in 0..ticks {
        for (p0, p1, r) in tl.tick_motion(k) {
            let (rel0, rel1) = (p0 - p, p1 - p);
            let reach = r + robot_radius;
            let limit = (rel1 - rel0).norm() + reach;
            if rel0.norm_sq() > limit * limit && rel1.norm_sq() > limit * limit {
                continue;
            }
            for s in 1..=SUBSTEPS {
                if rel0.lerp(rel1, s as f64 / SUBSTEPS as f64).norm_sq() < reach * reach {
                    flags[k * SUBSTEPS as usize + s as usize] = true;
                }
            }
        }
    }
    flags
}

/// Survival time, capped at `t_max`, of a static robot whose flags are given,
/// starting at tick `start`.
fn survival_from(flags: &[bool], start: u64, dt: f64, t_max: f64) -> f64 {
    let j0 = (start * SUBSTEPS as u64) as usize;
    if j0 >= flags.len() {
        return t_max;
    }
    match flags[j0..].iter().position(|&f| f) {
        Some(i) => substep_time(0, i as u32, dt).min(t_max),
        None => t_max,
    }
}

fn check_horizon(tl: &Timeline, needed: f64) {
    if tl.duration() + 1e-9 < needed {
        log::warn!(
            "obstacle replay covers {:.2} s but {:.2} s are needed; robots are assumed to survive past the end",
            tl.duration(),
            needed
        );
    }
}

/// Mean capped time until an obstacle first hits a static robot placed at
/// each lattice position.
pub fn survivability(tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    if lattice.positions.is_empty() {
        return params.t_max;
    }
    check_horizon(tl, params.t_max);
    lattice
        .positions
        .iter()
        .map(|&p| survival_from(&contact_flags(tl, p, params.robot_radius), 0, tl.dt, params.t_max))
        .sum::<f64>()
        / lattice.positions.len() as f64
}

/// Mean over start times of the shortest survival among all lattice robots.
pub fn global_survivability(tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    let k = params.start_time_samples;
    check_horizon(tl, (k - 1) as f64 * params.t_sample + params.t_max);
    let flags: Vec<Vec<bool>> = lattice
        .positions
        .iter()
        .map(|&p| contact_flags(tl, p, params.robot_radius))
        .collect();
    (0..k)
        .map(|j| {
            let start = ticks_for(j as f64 * params.t_sample, tl.dt);
            flags
                .iter()
                .map(|f| survival_from(f, start, tl.dt, params.t_max))
                .fold(params.t_max, f64::min)
        })
        .sum::<f64>()
        / k as f64
}

pub fn compute(metric: Metric, tl: &Timeline, lattice: &SampleLattice, params: &MetricParams) -> f64 {
    match metric {
        Metric::ObstacleDensity => obstacle_density(tl),
        Metric::Traversability => traversability(tl, lattice, params),
        Metric::DynamicTraversability => dynamic_traversability(tl, lattice, params),
        Metric::VoFeasibility => vo_feasibility(tl, lattice, params),
        Metric::Survivability => survivability(tl, lattice, params),
        Metric::GlobalSurvivability => global_survivability(tl, lattice, params),
    }
}

/// Raw and preprocessed metric values of one map.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub map_id: String,
    pub raw: BTreeMap<Metric, f64>,
    pub preprocessed: BTreeMap<Metric, f64>,
}

/// All six raw metrics of one timeline.
pub fn raw_report(map_id: &str, tl: &Timeline, params: &MetricParams) -> MetricReport {
    let lattice = params.lattice(tl.bounds);
    MetricReport {
        map_id: map_id.to_string(),
        raw: Metric::ALL
            .into_iter()
            .map(|m| (m, compute(m, tl, &lattice, params)))
            .collect(),
        preprocessed: BTreeMap::new(),
    }
}

/// Raw metrics of a map, replayed for as long as the metrics need.
pub fn map_report(map: &Arc<DynamicMap>, params: &MetricParams) -> MetricReport {
    let tl = Timeline::from_map(map, params.dt, params.horizon());
    raw_report(&map.id, &tl, params)
}

/// Computes the raw metrics of every map on `jobs` threads and preprocesses
/// them over the whole set. Output order follows `maps`.
pub fn evaluate_maps(
    maps: &[Arc<DynamicMap>],
    params: &MetricParams,
    jobs: usize,
) -> Result<(Vec<MetricReport>, BTreeMap<Metric, NormBounds>)> {
    params.validate()?;
    if jobs == 0 {
        return Err(Error::invalid("jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("could not start worker pool: {e}")))?;
    let mut reports: Vec<MetricReport> =
        pool.install(|| maps.par_iter().map(|m| map_report(m, params)).collect());
    let bounds = preprocess(&mut reports);
    Ok((reports, bounds))
}
