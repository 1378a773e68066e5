use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mapfile::quantize;
use super::{DatasetTag, DynamicMap, MapSpec, MotionProfile, ObstacleInit, RvoParams, MAP_SIZE};
use crate::error::{Error, Result};
use crate::geometry::{Bounds, Vec2};

pub const DATASET_I_COUNTS: [usize; 3] = [10, 20, 30];
pub const DATASET_I_RADII: [f64; 3] = [0.5, 1.0, 1.5];
pub const DATASET_I_SPEEDS: [f64; 3] = [2.0, 4.0, 6.0];

/// Obstacle count of every Dataset II map.
pub const DATASET_II_COUNT: usize = 20;
const DATASET_II_RADIUS: f64 = 1.0;
const DATASET_II_SPEED: f64 = 4.0;

const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// splitmix64 finalizer over two words.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_add(b.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeds are kept below 2^63 so they survive formats with signed integers.
fn map_seed(base: u64, index: u64) -> u64 {
    mix(base, index) >> 1
}

#[derive(Clone, Debug)]
pub struct DatasetIParams {
    pub counts: Vec<usize>,
    pub radii: Vec<f64>,
    pub speeds: Vec<f64>,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
}

impl Default for DatasetIParams {
    fn default() -> Self {
        DatasetIParams {
            counts: DATASET_I_COUNTS.to_vec(),
            radii: DATASET_I_RADII.to_vec(),
            speeds: DATASET_I_SPEEDS.to_vec(),
            seeds_per_cell: 20,
            base_seed: 0,
        }
    }
}

/// Enumerates every (count, radius, speed, seed) cell of a uniform dataset.
pub fn generate_dataset_i(params: &DatasetIParams) -> Result<Vec<MapSpec>> {
    if params.counts.is_empty() || params.radii.is_empty() || params.speeds.is_empty() {
        return Err(Error::invalid("dataset I parameter sets must be non-empty"));
    }
    if params.seeds_per_cell == 0 {
        return Err(Error::invalid("seeds per cell must be at least 1"));
    }
    if params.counts.contains(&0)
        || params.radii.iter().chain(&params.speeds).any(|&x| !(x > 0.0))
    {
        return Err(Error::invalid("dataset I values must be positive"));
    }
    let mut specs = Vec::new();
    for &n in &params.counts {
        for &r in &params.radii {
            for &v in &params.speeds {
                for s in 0..params.seeds_per_cell {
                    let index = specs.len() as u64;
                    specs.push(MapSpec {
                        id: format!("I-n{n}-r{r}-v{v}-s{s:02}"),
                        bounds: Bounds::new(MAP_SIZE, MAP_SIZE),
                        n_obs: n,
                        size_range: (r, r),
                        speed_range: (v, v),
                        profile: MotionProfile::ConstantVelocity,
                        seed: map_seed(params.base_seed, index),
                        dataset_tag: DatasetTag::DatasetI,
                    });
                }
            }
        }
    }
    Ok(specs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetIIKind {
    /// Heterogeneous speeds.
    A,
    /// Heterogeneous sizes.
    B,
    /// Reciprocal avoidance between obstacles.
    C,
}

impl DatasetIIKind {
    pub fn tag(self) -> DatasetTag {
        match self {
            DatasetIIKind::A => DatasetTag::DatasetIIa,
            DatasetIIKind::B => DatasetTag::DatasetIIb,
            DatasetIIKind::C => DatasetTag::DatasetIIc,
        }
    }

    fn label(self) -> &'static str {
        match self {
            DatasetIIKind::A => "IIa",
            DatasetIIKind::B => "IIb",
            DatasetIIKind::C => "IIc",
        }
    }
}

pub fn generate_dataset_ii(kind: DatasetIIKind, count: usize, seed: u64) -> Result<Vec<MapSpec>> {
    if count == 0 {
        return Err(Error::invalid("dataset II count must be at least 1"));
    }
    let salt = match kind {
        DatasetIIKind::A => 0xa,
        DatasetIIKind::B => 0xb,
        DatasetIIKind::C => 0xc,
    };
    Ok((0..count)
        .map(|i| {
            let (size_range, speed_range, profile) = match kind {
                DatasetIIKind::A => (
                    (DATASET_II_RADIUS, DATASET_II_RADIUS),
                    (2.0, 6.0),
                    MotionProfile::ConstantVelocity,
                ),
                DatasetIIKind::B => (
                    (0.5, 1.5),
                    (DATASET_II_SPEED, DATASET_II_SPEED),
                    MotionProfile::ConstantVelocity,
                ),
                DatasetIIKind::C => (
                    (DATASET_II_RADIUS, DATASET_II_RADIUS),
                    (DATASET_II_SPEED, DATASET_II_SPEED),
                    MotionProfile::Rvo(RvoParams::with_speed(DATASET_II_SPEED)),
                ),
            };
            MapSpec {
                id: format!("{}-{i:03}", kind.label()),
                bounds: Bounds::new(MAP_SIZE, MAP_SIZE),
                n_obs: DATASET_II_COUNT,
                size_range,
                speed_range,
                profile,
                seed: map_seed(mix(seed, salt), i as u64),
                dataset_tag: kind.tag(),
            }
        })
        .collect())
}

impl MapSpec {
    /// Expands the spec into its initial obstacle set by rejection sampling.
    ///
    /// Sampled values are rounded to the precision of the map file format so
    /// that a written map reloads to exactly the same state.
    pub fn expand(&self) -> Result<DynamicMap> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut obstacles: Vec<ObstacleInit> = Vec::with_capacity(self.n_obs);
        for id in 0..self.n_obs {
            let radius = quantize(sample_range(&mut rng, self.size_range));
            let speed = sample_range(&mut rng, self.speed_range);
            let mut placed = None;
            for _ in 0..MAX_PLACEMENT_ATTEMPTS {
                let p = Vec2::new(
                    quantize(rng.gen_range(radius..=self.bounds.width - radius)),
                    quantize(rng.gen_range(radius..=self.bounds.height - radius)),
                );
                let free = obstacles
                    .iter()
                    .all(|o| o.position.distance(p) >= o.radius + radius);
                if free && self.bounds.contains_disc(p, radius) {
                    placed = Some(p);
                    break;
                }
            }
            let Some(position) = placed else {
                return Err(Error::PlacementFailure {
                    cell: self.id.clone(),
                    placed: obstacles.len(),
                    requested: self.n_obs,
                });
            };
            let heading = rng.gen_range(0.0..TAU);
            let dir = Vec2::from_angle(heading);
            obstacles.push(ObstacleInit {
                id: id as u32,
                position,
                velocity: Vec2::new(quantize(dir.x * speed), quantize(dir.y * speed)),
                radius,
            });
        }
        Ok(DynamicMap {
            id: self.id.clone(),
            bounds: self.bounds,
            seed: self.seed,
            dataset_tag: self.dataset_tag,
            profile: self.profile,
            obstacles,
        })
    }

    fn validate(&self) -> Result<()> {
        let (r0, r1) = self.size_range;
        let (v0, v1) = self.speed_range;
        if !(r0 > 0.0 && r1 >= r0) {
            return Err(Error::invalid(format!("{}: bad size range", self.id)));
        }
        if !(v0 >= 0.0 && v1 >= v0) {
            return Err(Error::invalid(format!("{}: bad speed range", self.id)));
        }
        if 2.0 * r1 >= self.bounds.width.min(self.bounds.height) {
            return Err(Error::invalid(format!("{}: obstacles larger than map", self.id)));
        }
        if self.dataset_tag == DatasetTag::DatasetI && (r0 != r1 || v0 != v1) {
            return Err(Error::invalid(format!(
                "{}: dataset I maps need uniform size and speed",
                self.id
            )));
        }
        Ok(())
    }
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}
