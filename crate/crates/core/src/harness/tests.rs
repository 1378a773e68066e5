use super::*;
use crate::geometry::Bounds;
use crate::planning::Trajectory;
use crate::world::{generate_dataset_i, DatasetIParams, DatasetTag, MotionProfile, ObstacleInit};

fn map_with(obstacles: Vec<ObstacleInit>) -> Arc<DynamicMap> {
    Arc::new(DynamicMap {
        id: "test".into(),
        bounds: Bounds::new(50.0, 50.0),
        seed: 7,
        dataset_tag: DatasetTag::Custom,
        profile: MotionProfile::ConstantVelocity,
        obstacles,
    })
}

fn spec(planner: PlannerKind, gaze: GazePolicy, start: Vec2, goal: Vec2, v: f64) -> TrialSpec {
    TrialSpec {
        map_id: "test".into(),
        planner,
        gaze,
        start,
        goal,
        v_cruise: v,
        time_limit: 60.0,
    }
}

fn point_mass_time(d: f64, a: f64, v: f64) -> f64 {
    let d_acc = v * v / (2.0 * a);
    if d <= d_acc {
        (2.0 * d / a).sqrt()
    } else {
        v / a + (d - d_acc) / v
    }
}

struct HoldStill;

impl TrajectoryPlanner for HoldStill {
    fn plan(&mut self, _: &PerceptionFrame, s: &RobotState, _: Vec2, _: &RobotConfig) -> PlanOutcome {
        PlanOutcome::trajectory(Trajectory::stationary(s))
    }
}

struct AlwaysBrake;

impl TrajectoryPlanner for AlwaysBrake {
    fn plan(&mut self, _: &PerceptionFrame, s: &RobotState, _: Vec2, c: &RobotConfig) -> PlanOutcome {
        PlanOutcome::brake(s, c)
    }
}

#[test]
fn empty_map_succeeds_near_point_mass_time() {
    let cfg = RunConfig::default();
    let map = map_with(vec![]);
    let (start, goal) = (Vec2::new(10.0, 10.0), Vec2::new(40.0, 25.0));
    for planner in PlannerKind::ALL {
        for gaze in [GazePolicy::FullRange, GazePolicy::LookAhead] {
            for v in [2.0, 4.0, 6.0] {
                let rec = run_trial(&spec(planner, gaze, start, goal, v), &map, &cfg);
                assert_eq!(rec.outcome, Outcome::Success, "{planner} {gaze} v={v}");
                let oracle = point_mass_time(start.distance(goal) - cfg.goal_tolerance, cfg.a_max, v);
                let err = (rec.duration - oracle).abs() / oracle;
                assert!(err <= 0.3, "{planner} {gaze} v={v}: {} vs {oracle}", rec.duration);
                assert!(rec.min_clearance.is_infinite());
            }
        }
    }
}

/// Earliest time a moving obstacle touches a static disc, found by dense
/// sampling of the replayed obstacle path.
fn earliest_contact(map: &Arc<DynamicMap>, p: Vec2, radius: f64, dt: f64, limit: f64) -> Option<f64> {
    let mut world = map.initial_world();
    let fine = 1000;
    while world.time < limit {
        let before: Vec<Vec2> = world.obstacles.iter().map(|o| o.position).collect();
        let t0 = world.time;
        world.advance(dt);
        for s in 1..=fine {
            let f = s as f64 / fine as f64;
            for (o, &b) in world.obstacles.iter().zip(&before) {
                if b.lerp(o.position, f).distance(p) < o.radius + radius {
                    return Some(t0 + f * dt);
                }
            }
        }
    }
    None
}

#[test]
fn stationary_robot_is_hit_when_the_obstacle_arrives() {
    let cfg = RunConfig::default();
    let start = Vec2::new(25.0, 25.0);
    let map = map_with(vec![ObstacleInit {
        id: 0,
        position: Vec2::new(35.0, 25.3),
        velocity: Vec2::new(-3.7, 0.0),
        radius: 1.2,
    }]);
    let s = spec(PlannerKind::Mpc, GazePolicy::FullRange, start, Vec2::new(40.0, 40.0), 4.0);
    let rec = run_trial_with(&s, &map, &cfg, &mut HoldStill);
    assert_eq!(rec.outcome, Outcome::Collision);
    assert!(rec.min_clearance < 0.0);
    let oracle = earliest_contact(&map, start, cfg.robot_radius, cfg.dt, 60.0).unwrap();
    assert!(rec.duration >= oracle - 1e-9, "{} < {oracle}", rec.duration);
    assert!(rec.duration - oracle <= cfg.dt / SUBSTEPS as f64 + 1e-9);
}

#[test]
fn brake_only_planner_deadlocks() {
    let cfg = RunConfig::default();
    let map = map_with(vec![]);
    let s = spec(PlannerKind::Mpc, GazePolicy::FullRange, Vec2::new(10.0, 10.0), Vec2::new(40.0, 40.0), 4.0);
    let rec = run_trial_with(&s, &map, &cfg, &mut AlwaysBrake);
    assert_eq!(rec.outcome, Outcome::Deadlock);
    assert_eq!(rec.replan_count, cfg.deadlock_brakes);
    assert!((rec.duration - (cfg.deadlock_brakes - 1) as f64 * cfg.dt).abs() < 1e-9);
}

#[test]
fn tiny_time_limit_times_out() {
    let cfg = RunConfig::default();
    let map = map_with(vec![]);
    let mut s = spec(PlannerKind::GlobalPrimitive, GazePolicy::LookGoal, Vec2::new(10.0, 10.0), Vec2::new(40.0, 40.0), 4.0);
    s.time_limit = 0.1;
    let rec = run_trial(&s, &map, &cfg);
    assert_eq!(rec.outcome, Outcome::Timeout);
    assert!((rec.duration - 0.1).abs() < 1e-9);
}

#[test]
fn spawn_overlap_is_collision_at_zero() {
    let cfg = RunConfig::default();
    let map = map_with(vec![ObstacleInit {
        id: 0,
        position: Vec2::new(10.5, 10.0),
        velocity: Vec2::ZERO,
        radius: 1.0,
    }]);
    let s = spec(PlannerKind::LocalPrimitive, GazePolicy::FullRange, Vec2::new(10.0, 10.0), Vec2::new(40.0, 40.0), 4.0);
    let rec = run_trial(&s, &map, &cfg);
    assert_eq!(rec.outcome, Outcome::Collision);
    assert_eq!(rec.duration, 0.0);
}

#[test]
fn matrix_has_216_trials_and_ignores_parallelism() {
    let cfg = RunConfig::default();
    let maps = generate_dataset_i(&DatasetIParams {
        counts: vec![10],
        radii: vec![1.0],
        speeds: vec![4.0],
        seeds_per_cell: 1,
        base_seed: 3,
    })
    .unwrap();
    let maps: Vec<Arc<DynamicMap>> = maps.iter().map(|s| Arc::new(s.expand().unwrap())).collect();
    let pairs = [(PlannerKind::LocalPrimitive, GazePolicy::LookAhead)];
    let a = run_matrix(&maps, &pairs, &cfg, 1).unwrap();
    assert_eq!(a.records.len(), 216);
    assert!(a.failures.is_empty());
    let b = run_matrix(&maps, &pairs, &cfg, 3).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.table(), b.table());
    assert_eq!(a.table().cells.values().next().unwrap().trials, 216);
    for r in &a.records {
        if r.outcome == Outcome::Success {
            assert!(r.min_clearance >= 0.0);
        }
    }
}

#[test]
fn matrix_rejects_zero_parallelism() {
    assert!(run_matrix(&[], &[], &RunConfig::default(), 0).is_err());
}

#[test]
fn all_success_aggregates_to_one() {
    let cfg = RunConfig::default();
    let records: Vec<TrialRecord> = trial_matrix("m", PlannerKind::Mpc, GazePolicy::OwlStyle, &cfg)
        .into_iter()
        .map(|trial| TrialRecord {
            trial,
            outcome: Outcome::Success,
            duration: 1.0,
            min_clearance: 0.5,
            replan_count: 3,
        })
        .collect();
    let table = SuccessTable::from_records(&records);
    assert_eq!(table.rate("m", (PlannerKind::Mpc, GazePolicy::OwlStyle)), Some(1.0));
    let mut shuffled = records.clone();
    shuffled.reverse();
    assert_eq!(SuccessTable::from_records(&shuffled), table);
}

#[test]
fn results_and_success_files_round_trip() {
    let cfg = RunConfig::default();
    let records: Vec<TrialRecord> = trial_matrix("m-1", PlannerKind::GlobalPrimitive, GazePolicy::Rotating, &cfg)
        .into_iter()
        .enumerate()
        .map(|(i, trial)| TrialRecord {
            trial,
            outcome: [Outcome::Success, Outcome::Collision, Outcome::Deadlock, Outcome::Timeout][i % 4],
            duration: i as f64 * 0.05,
            min_clearance: 0.1 * i as f64 - 3.0,
            replan_count: i as u32,
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_results(&records, &path).unwrap();
    assert_eq!(read_results(&path, cfg.time_limit).unwrap(), records);
    let table = SuccessTable::from_records(&records);
    let spath = dir.path().join("success.csv");
    write_success(&table, &spath).unwrap();
    assert_eq!(read_success(&spath).unwrap(), table);
}

