//! Dynamic environments: map definitions, obstacle kinematics and replay.

mod generate;
pub mod mapfile;
pub mod rvo;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Bounds, Vec2};

pub use generate::{
    generate_dataset_i, generate_dataset_ii, DatasetIIKind, DatasetIParams, DATASET_I_RADII,
    DATASET_I_SPEEDS, DATASET_I_COUNTS, DATASET_II_COUNT,
};

/// Default simulation tick in seconds.
pub const DEFAULT_DT: f64 = 0.05;

/// Side length of the square maps used by the generated datasets.
pub const MAP_SIZE: f64 = 50.0;

/// Distance at which an RVO obstacle considers its waypoint reached.
const WAYPOINT_REACHED: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvoParams {
    pub time_horizon: f64,
    pub neighbor_dist: f64,
    pub preferred_speed: f64,
}

impl RvoParams {
    pub fn with_speed(preferred_speed: f64) -> Self {
        RvoParams {
            time_horizon: 2.0,
            neighbor_dist: 10.0,
            preferred_speed,
        }
    }
}

/// How obstacles of a map move.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MotionProfile {
    ConstantVelocity,
    Rvo(RvoParams),
}

impl MotionProfile {
    pub fn is_rvo(&self) -> bool {
        matches!(self, MotionProfile::Rvo(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetTag {
    DatasetI,
    DatasetIIa,
    DatasetIIb,
    DatasetIIc,
    Custom,
}

impl DatasetTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetTag::DatasetI => "DatasetI",
            DatasetTag::DatasetIIa => "DatasetII-a",
            DatasetTag::DatasetIIb => "DatasetII-b",
            DatasetTag::DatasetIIc => "DatasetII-c",
            DatasetTag::Custom => "Custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "DatasetI" => DatasetTag::DatasetI,
            "DatasetII-a" => DatasetTag::DatasetIIa,
            "DatasetII-b" => DatasetTag::DatasetIIb,
            "DatasetII-c" => DatasetTag::DatasetIIc,
            "Custom" => DatasetTag::Custom,
            _ => return None,
        })
    }
}

/// Generation parameters of one map. Expanding the same spec always yields the
/// same initial obstacle set.
#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub id: String,
    pub bounds: Bounds,
    pub n_obs: usize,
    pub size_range: (f64, f64),
    pub speed_range: (f64, f64),
    pub profile: MotionProfile,
    pub seed: u64,
    pub dataset_tag: DatasetTag,
}

/// Obstacle state at `t = 0` as stored in a map file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleInit {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
}

/// A fully expanded map: everything needed to replay it deterministically.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicMap {
    pub id: String,
    pub bounds: Bounds,
    pub seed: u64,
    pub dataset_tag: DatasetTag,
    pub profile: MotionProfile,
    pub obstacles: Vec<ObstacleInit>,
}

impl DynamicMap {
    pub fn obstacle_count(&self) -> usize {
        self.obstacles.len()
    }

    /// Mean obstacle radius (the characteristic size for uniform maps).
    pub fn mean_radius(&self) -> f64 {
        if self.obstacles.is_empty() {
            return 0.0;
        }
        self.obstacles.iter().map(|o| o.radius).sum::<f64>() / self.obstacles.len() as f64
    }

    /// Mean obstacle speed at `t = 0`.
    pub fn mean_speed(&self) -> f64 {
        if self.obstacles.is_empty() {
            return 0.0;
        }
        self.obstacles.iter().map(|o| o.velocity.norm()).sum::<f64>()
            / self.obstacles.len() as f64
    }

    /// Initial world state.
    pub fn initial_world(self: &Arc<Self>) -> World {
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| {
                let waypoint = self
                    .profile
                    .is_rvo()
                    .then(|| waypoint(self.seed, o.id, 0, self.bounds, o.radius));
                Obstacle {
                    id: o.id,
                    position: o.position,
                    velocity: o.velocity,
                    radius: o.radius,
                    waypoint,
                    waypoint_index: 0,
                }
            })
            .collect();
        World {
            map: Arc::clone(self),
            time: 0.0,
            tick: 0,
            obstacles,
        }
    }
}

/// A disc obstacle at some instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    /// Current navigation target of an RVO obstacle.
    pub waypoint: Option<Vec2>,
    pub waypoint_index: u32,
}

/// Snapshot of a map at a given time.
#[derive(Clone, Debug)]
pub struct World {
    pub map: Arc<DynamicMap>,
    pub time: f64,
    pub tick: u64,
    pub obstacles: Vec<Obstacle>,
}

impl World {
    pub fn bounds(&self) -> Bounds {
        self.map.bounds
    }

    /// Returns the world advanced by `dt`.
    pub fn step(&self, dt: f64) -> World {
        let mut next = self.clone();
        next.advance(dt);
        next
    }

    /// Advances the world in place by `dt` seconds.
    pub fn advance(&mut self, dt: f64) {
        assert!(dt > 0.0, "dt must be positive, was {dt}");
        if let MotionProfile::Rvo(params) = self.map.profile {
            self.select_rvo_velocities(params, dt);
        }
        let bounds = self.map.bounds;
        for o in &mut self.obstacles {
            o.position += o.velocity * dt;
            reflect(o, bounds);
        }
        self.time += dt;
        self.tick += 1;
    }

    fn select_rvo_velocities(&mut self, params: RvoParams, dt: f64) {
        let bounds = self.map.bounds;
        let seed = self.map.seed;
        for o in &mut self.obstacles {
            if let Some(wp) = o.waypoint {
                if o.position.distance(wp) < WAYPOINT_REACHED {
                    o.waypoint_index += 1;
                    o.waypoint = Some(waypoint(seed, o.id, o.waypoint_index, bounds, o.radius));
                }
            }
        }
        let agents: Vec<rvo::Agent> = self
            .obstacles
            .iter()
            .map(|o| rvo::Agent {
                position: o.position,
                velocity: o.velocity,
                radius: o.radius,
            })
            .collect();
        let speed = params.preferred_speed;
        let new_velocities: Vec<Vec2> = self
            .obstacles
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let preferred = match o.waypoint {
                    Some(wp) => (wp - o.position).normalized() * speed,
                    None => o.velocity,
                };
                rvo::avoiding_velocity(
                    &agents,
                    i,
                    preferred,
                    speed,
                    params.time_horizon,
                    params.neighbor_dist,
                    dt,
                )
            })
            .collect();
        for (o, v) in self.obstacles.iter_mut().zip(new_velocities) {
            o.velocity = v;
        }
    }
}

/// Mirrors a disc that crossed a wall back inside and flips the normal
/// velocity component.
fn reflect(o: &mut Obstacle, bounds: Bounds) {
    let r = o.radius;
    if o.position.x - r < 0.0 {
        o.position.x = 2.0 * r - o.position.x;
        o.velocity.x = o.velocity.x.abs();
    } else if o.position.x + r > bounds.width {
        o.position.x = 2.0 * (bounds.width - r) - o.position.x;
        o.velocity.x = -o.velocity.x.abs();
    }
    if o.position.y - r < 0.0 {
        o.position.y = 2.0 * r - o.position.y;
        o.velocity.y = o.velocity.y.abs();
    } else if o.position.y + r > bounds.height {
        o.position.y = 2.0 * (bounds.height - r) - o.position.y;
        o.velocity.y = -o.velocity.y.abs();
    }
}

/// The `index`-th waypoint of obstacle `id`; a pure function of its inputs so
/// that replays never depend on hidden RNG state.
fn waypoint(seed: u64, id: u32, index: u32, bounds: Bounds, radius: f64) -> Vec2 {
    let mut rng = ChaCha8Rng::seed_from_u64(generate::mix(
        seed ^ 0x5eed_0f_a11,
        ((id as u64) << 32) | index as u64,
    ));
    Vec2::new(
        rng.gen_range(radius..bounds.width - radius),
        rng.gen_range(radius..bounds.height - radius),
    )
}

/// World state at time `t`, obtained by stepping from `t = 0`. Times that are
/// not a multiple of `dt` are rounded down to the previous tick.
pub fn replay(map: &Arc<DynamicMap>, t: f64, dt: f64) -> World {
    assert!(t >= 0.0, "replay time must be non-negative");
    let ticks = ticks_for(t, dt);
    let mut world = map.initial_world();
    for _ in 0..ticks {
        world.advance(dt);
    }
    world
}

/// Number of whole ticks in `t` seconds, tolerant to floating-point noise.
pub fn ticks_for(t: f64, dt: f64) -> u64 {
    ((t / dt) + 1e-9).floor() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(position: Vec2, velocity: Vec2, radius: f64) -> Arc<DynamicMap> {
        Arc::new(DynamicMap {
            id: "t".into(),
            bounds: Bounds::new(50.0, 50.0),
            seed: 1,
            dataset_tag: DatasetTag::Custom,
            profile: MotionProfile::ConstantVelocity,
            obstacles: vec![ObstacleInit { id: 0, position, velocity, radius }],
        })
    }

    #[test]
    fn euler_step() {
        let map = single(Vec2::new(10.0, 10.0), Vec2::new(2.0, 0.0), 0.5);
        let w = map.initial_world().step(0.1);
        assert!((w.obstacles[0].position - Vec2::new(10.2, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn wall_reflection() {
        let map = single(Vec2::new(49.4, 10.0), Vec2::new(2.0, 0.0), 0.5);
        let w = map.initial_world().step(0.1);
        assert_eq!(w.obstacles[0].velocity, Vec2::new(-2.0, 0.0));
        assert!(w.bounds().contains_disc(w.obstacles[0].position, 0.5));
    }

    #[test]
    fn replay_zero_is_initial() {
        let map = single(Vec2::new(10.0, 10.0), Vec2::new(2.0, 1.0), 0.5);
        let w = replay(&map, 0.0, DEFAULT_DT);
        assert_eq!(w.obstacles, map.initial_world().obstacles);
        assert_eq!(w.tick, 0);
    }

    #[test]
    fn replay_matches_repeated_steps() {
        let map = single(Vec2::new(10.0, 10.0), Vec2::new(2.0, 1.0), 0.5);
        let mut w = map.initial_world();
        for _ in 0..20 {
            w = w.step(DEFAULT_DT);
        }
        assert_eq!(replay(&map, 1.0, DEFAULT_DT).obstacles, w.obstacles);
    }

    #[test]
    fn replay_constant_velocity_closed_form() {
        let p0 = Vec2::new(5.0, 7.0);
        let v = Vec2::new(1.5, -0.25);
        let map = single(p0, v, 0.5);
        for &t in &[0.5, 1.0, 3.0, 10.0] {
            let w = replay(&map, t, DEFAULT_DT);
            let tol = 1e-9 * t / DEFAULT_DT;
            assert!((w.obstacles[0].position - (p0 + v * t)).norm() <= tol, "t={t}");
        }
    }

    #[test]
    fn replay_rounds_down_to_tick() {
        let map = single(Vec2::new(10.0, 10.0), Vec2::new(2.0, 0.0), 0.5);
        assert_eq!(replay(&map, 0.07, DEFAULT_DT).tick, 1);
        assert_eq!(replay(&map, 0.1, DEFAULT_DT).tick, 2);
    }
}
