use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use dyndiff_core::perception::{sense, CellState, FieldOfView, PerceptionFrame, RAY_RESOLUTION};
use dyndiff_core::world::{
    generate_dataset_i, generate_dataset_ii, mapfile, replay, DatasetIIKind, DatasetIParams, DatasetTag,
    DynamicMap, MotionProfile, ObstacleInit, World,
};
use dyndiff_core::{Bounds, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_maps() -> Vec<Arc<DynamicMap>> {
    let mut specs = generate_dataset_i(&DatasetIParams {
        seeds_per_cell: 1,
        base_seed: 3,
        ..DatasetIParams::default()
    })
    .unwrap();
    specs.truncate(9);
    for kind in [DatasetIIKind::A, DatasetIIKind::B, DatasetIIKind::C] {
        specs.extend(generate_dataset_ii(kind, 2, 3).unwrap());
    }
    specs.iter().map(|s| Arc::new(s.expand().unwrap())).collect()
}

#[test]
fn obstacles_stay_inside_the_map() {
    for map in sample_maps() {
        let mut w = map.initial_world();
        for _ in 0..600 {
            w.advance(0.05);
            for o in &w.obstacles {
                assert!(map.bounds.contains_disc(o.position, o.radius - 1e-9), "{} {o:?}", map.id);
            }
        }
    }
}

#[test]
fn reflections_keep_constant_speeds() {
    for map in sample_maps().into_iter().filter(|m| !m.profile.is_rvo()) {
        let w = replay(&map, 30.0, 0.05);
        for (o, init) in w.obstacles.iter().zip(&map.obstacles) {
            assert!((o.velocity.norm() - init.velocity.norm()).abs() < 1e-9);
        }
    }
}

#[test]
fn replays_are_deterministic_and_survive_the_map_file() {
    let dir = tempfile::tempdir().unwrap();
    for map in sample_maps() {
        let path = dir.path().join(format!("{}.toml", map.id));
        mapfile::write(&map, &path).unwrap();
        let back = Arc::new(mapfile::read(&path).unwrap());
        assert_eq!(*back, *map);
        let (a, b) = (replay(&map, 12.3, 0.05), replay(&back, 12.3, 0.05));
        assert_eq!(a.tick, b.tick);
        assert_eq!(a.obstacles, b.obstacles);
    }
}

fn random_world(rng: &mut ChaCha8Rng) -> World {
    let n = rng.gen_range(1..12);
    let obstacles = (0..n)
        .map(|id| {
            let r = rng.gen_range(0.3..1.5);
            ObstacleInit {
                id,
                position: Vec2::new(rng.gen_range(r..20.0 - r), rng.gen_range(r..20.0 - r)),
                velocity: Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                radius: r,
            }
        })
        .collect();
    Arc::new(DynamicMap {
        id: "w".into(),
        bounds: Bounds::new(20.0, 20.0),
        seed: 0,
        dataset_tag: DatasetTag::Custom,
        profile: MotionProfile::ConstantVelocity,
        obstacles,
    })
    .initial_world()
}

/// A sensor position outside every disc.
fn free_point(world: &World, rng: &mut ChaCha8Rng) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(1.0..19.0), rng.gen_range(1.0..19.0));
        if world.obstacles.iter().all(|o| o.position.distance(p) > o.radius) {
            return p;
        }
    }
}

/// Obstacles that terminate at least one ray of the fan, each ray solved by
/// its own quadratic.
fn visible_by_brute_force(world: &World, fov: &FieldOfView) -> Vec<u32> {
    let (start, n) = if fov.angular_width >= TAU - 1e-9 {
        (fov.heading, 720)
    } else {
        (fov.heading - fov.angular_width / 2.0, (fov.angular_width / RAY_RESOLUTION).round() as usize + 1)
    };
    let mut seen = Vec::new();
    for k in 0..n {
        let a = start + k as f64 * RAY_RESOLUTION;
        let dir = Vec2::new(a.cos(), a.sin());
        let mut best: Option<(f64, u32)> = None;
        for o in &world.obstacles {
            let m = fov.center - o.position;
            let b = m.x * dir.x + m.y * dir.y;
            let c = m.x * m.x + m.y * m.y - o.radius * o.radius;
            let t = if c <= 0.0 {
                0.0
            } else if b * b - c >= 0.0 && -b - (b * b - c).sqrt() >= 0.0 {
                -b - (b * b - c).sqrt()
            } else {
                continue;
            };
            if t <= fov.depth && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, o.id));
            }
        }
        if let Some((_, id)) = best {
            if !seen.contains(&id) {
                seen.push(id);
            }
        }
    }
    seen.sort();
    seen
}

#[test]
fn tracked_obstacles_match_a_brute_force_ray_cast() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..300 {
        let world = random_world(&mut rng);
        let center = free_point(&world, &mut rng);
        let fov = if case % 2 == 0 {
            FieldOfView::full(center, 8.0)
        } else {
            FieldOfView::new(center, rng.gen_range(-3.0..3.0), FRAC_PI_2, 8.0).unwrap()
        };
        let empty = PerceptionFrame::empty(world.bounds(), 0.5, fov);
        let frame = sense(&world, fov, &empty, 0.0);
        let tracked: Vec<u32> = frame.trackers.iter().map(|t| t.id).collect();
        assert_eq!(tracked, visible_by_brute_force(&world, &fov), "case {case}");
        for t in &frame.trackers {
            let o = world.obstacles.iter().find(|o| o.id == t.id).unwrap();
            assert_eq!(t.predict_position(world.time), o.position);
        }
    }
}

#[test]
fn occupied_cells_touch_an_obstacle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let world = random_world(&mut rng);
        let fov = FieldOfView::full(free_point(&world, &mut rng), 8.0);
        let frame = sense(&world, fov, &PerceptionFrame::empty(world.bounds(), 0.5, fov), 0.0);
        let half_diag = 0.5 * std::f64::consts::SQRT_2 / 2.0;
        for (col, row, state, _) in frame.grid.iter() {
            let c = frame.grid.center(col, row);
            let gap = world
                .obstacles
                .iter()
                .map(|o| o.position.distance(c) - o.radius)
                .fold(f64::INFINITY, f64::min);
            match state {
                CellState::Occupied => assert!(gap <= half_diag + 1e-6, "{c:?} is {gap} m from any obstacle"),
                CellState::Unoccupied => assert!(c.distance(fov.center) <= 8.0),
                CellState::Unexplored => {}
            }
        }
    }
}
