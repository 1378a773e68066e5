use std::f64::consts::TAU;
use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use dyndiff_core::config::RunConfig;
use dyndiff_core::geometry::Vec2;
use dyndiff_core::harness::{run_trial, TrialSpec};
use dyndiff_core::metrics::{self, Metric, MetricParams, Timeline};
use dyndiff_core::perception::{sense, FieldOfView, PerceptionFrame};
use dyndiff_core::planning::{make_planner, GazePolicy, PlannerKind, RobotState};
use dyndiff_core::world::{generate_dataset_i, DatasetIParams, DynamicMap};

fn map(n: usize, r: f64, v: f64) -> Arc<DynamicMap> {
    let specs = generate_dataset_i(&DatasetIParams {
        counts: vec![n],
        radii: vec![r],
        speeds: vec![v],
        seeds_per_cell: 1,
        base_seed: 42,
    })
    .unwrap();
    Arc::new(specs[0].expand().unwrap())
}

fn trials(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let m = map(20, 1.0, 4.0);
    let mut group = c.benchmark_group("trial");
    group.sample_size(10);
    for planner in PlannerKind::ALL {
        let spec = TrialSpec {
            map_id: m.id.clone(),
            planner,
            gaze: GazePolicy::LookAhead,
            start: Vec2::new(10.0, 10.0),
            goal: Vec2::new(40.0, 40.0),
            v_cruise: 4.0,
            time_limit: cfg.time_limit,
        };
        group.bench_function(planner.as_str(), |b| b.iter(|| run_trial(black_box(&spec), &m, &cfg)));
    }
    group.finish();
}

fn sensing(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let m = map(30, 1.5, 6.0);
    let world = m.initial_world();
    for (name, width) in [("sense-90", TAU / 4.0), ("sense-360", TAU)] {
        let fov = FieldOfView::new(Vec2::new(25.0, 25.0), 0.3, width, cfg.fov_depth).unwrap();
        let prev = PerceptionFrame::empty(m.bounds, cfg.grid_resolution, fov);
        c.bench_function(name, |b| b.iter(|| sense(&world, fov, black_box(&prev), cfg.dt)));
    }
}

fn planners(c: &mut Criterion) {
    let cfg = RunConfig::default();
    let m = map(30, 1.0, 4.0);
    let world = m.initial_world();
    let state = RobotState::at_rest(Vec2::new(10.0, 10.0), 0.8);
    let fov = FieldOfView::new(state.position, state.heading, TAU, cfg.fov_depth).unwrap();
    let frame = sense(&world, fov, &PerceptionFrame::empty(m.bounds, cfg.grid_resolution, fov), 0.0);
    let robot = cfg.robot(4.0);
    for kind in PlannerKind::ALL {
        c.bench_function(&format!("plan-{kind}"), |b| {
            b.iter(|| {
                let mut p = make_planner(kind, cfg.planner_params());
                p.plan(black_box(&frame), &state, Vec2::new(40.0, 40.0), &robot)
            })
        });
    }
}

fn metric_pass(c: &mut Criterion) {
    let params = MetricParams::default();
    let m = map(30, 1.5, 6.0);
    let tl = Timeline::from_map(&m, params.dt, params.horizon());
    let lattice = params.lattice(m.bounds);
    let mut group = c.benchmark_group("metric");
    for metric in Metric::ALL {
        group.bench_function(metric.as_str(), |b| {
            b.iter(|| metrics::compute(metric, black_box(&tl), &lattice, &params))
        });
    }
    group.bench_function("all-with-replay", |b| b.iter(|| metrics::map_report(black_box(&m), &params)));
    group.finish();
}

criterion_group!(benches, trials, sensing, planners, metric_pass);
criterion_main!(benches);
