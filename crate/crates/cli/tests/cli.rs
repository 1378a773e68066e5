use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dyndiff_core::analysis::read_model;
use dyndiff_core::config::RunConfig;
use dyndiff_core::harness::read_success;
use dyndiff_core::metrics::{read_metrics, Metric};
use dyndiff_core::world::mapfile;

fn dyndiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyndiff"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dyndiff(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("fast.toml");
    fs::write(&path, "trial_speeds = [4.0]\ntime_samples = 3\nstart_time_samples = 2\n").unwrap();
    path
}

#[test]
fn dataset_i_has_one_file_per_cell_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("maps");
    ok(&["gen-maps", "--dataset", "I", "--seeds", "2", "--out", s(&out)]);
    assert_eq!(fs::read_dir(&out).unwrap().count(), 54);
    let maps = mapfile::read_dir(&out).unwrap();
    assert!(maps.iter().all(|m| (10..=30).contains(&m.obstacle_count())));
}

#[test]
fn generation_is_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&["--seed", seed, "gen-maps", "--dataset", "IIb", "--seeds", "3", "--out", s(&out)]);
        let mut files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|f| fs::read(f).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(gen("a", "5"), gen("b", "5"));
    assert_ne!(gen("a", "5"), gen("c", "6"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(dyndiff(&["gen-maps", "--bogus"]).status.code(), Some(2));
    assert_eq!(dyndiff(&["gen-maps", "--dataset", "III", "--out", "x"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "dt = -1.0\n").unwrap();
    let out = dyndiff(&["--config", s(&bad), "gen-maps", "--dataset", "IIa", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dt"));

    fs::write(&bad, "no_such_field = 1\n").unwrap();
    let out = dyndiff(&["--config", s(&bad), "gen-maps", "--dataset", "IIa", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dyndiff(&["run", "--maps", s(&dir.path().join("missing")), "--out", s(&dir.path().join("r.csv"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn checked_in_config_matches_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn pipeline_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = fast_config(d);
    let maps = d.join("maps");
    ok(&["--config", s(&cfg), "gen-maps", "--dataset", "IIa", "--seeds", "5", "--out", s(&maps)]);

    let results = d.join("results.csv");
    let success = d.join("success.csv");
    ok(&[
        "--config", s(&cfg), "--jobs", "2", "run", "--maps", s(&maps), "--planners", "local-primitive",
        "--gazes", "full-range", "--out", s(&results), "--success", s(&success),
    ]);
    let table = read_success(&success).unwrap();
    assert_eq!(table.maps().len(), 5);
    assert_eq!(table.pairs().len(), 1);
    // header plus one row per trial: 12 ordered pairs times one speed
    assert_eq!(fs::read_to_string(&results).unwrap().lines().count(), 1 + 5 * 72);

    let metrics = d.join("metrics.csv");
    let bounds = d.join("bounds.csv");
    ok(&["--config", s(&cfg), "metrics", "--maps", s(&maps), "--out", s(&metrics), "--bounds-out", s(&bounds)]);
    let reports = read_metrics(&metrics).unwrap();
    assert_eq!(reports.len(), 5);
    for r in &reports {
        for m in Metric::ALL {
            assert!((0.0..=10.0).contains(&r.preprocessed[&m]), "{m}");
        }
    }

    let eval = d.join("eval.csv");
    let text = ok(&["analyze", "--results", s(&results), "--metrics", s(&metrics), "--out", s(&eval)]);
    assert!(text.contains("survivability"));
    let eval_text = fs::read_to_string(&eval).unwrap();
    assert!(eval_text.starts_with("metric,planner,gaze,srcc,cv_mean\n"));
    assert_eq!(eval_text.lines().filter(|l| l.contains(",summary,")).count(), 2 * Metric::ALL.len());

    // every IIa map has the same obstacle count
    let model = d.join("model.txt");
    let out = dyndiff(&["fit", "--metrics", s(&metrics), "--maps", s(&maps), "--out", s(&model)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));

    let maps_i = d.join("maps_i");
    let metrics_i = d.join("metrics_i.csv");
    ok(&["gen-maps", "--dataset", "I", "--seeds", "1", "--out", s(&maps_i)]);
    ok(&["--config", s(&cfg), "metrics", "--maps", s(&maps_i), "--out", s(&metrics_i), "--bounds-out", s(&d.join("b_i.csv"))]);
    ok(&["fit", "--metrics", s(&metrics_i), "--maps", s(&maps_i), "--out", s(&model)]);
    let fitted = read_model(&model).unwrap();
    assert!(fitted.coefficients.iter().all(|b| b.is_finite()));

    let synth = d.join("synth.toml");
    let text = ok(&["synth-map", "--model", s(&model), "--target", "-3", "--out", s(&synth)]);
    assert!(text.contains("n_obs"));
    let map = mapfile::read(&synth).unwrap();
    assert!((10..=30).contains(&map.obstacle_count()));
}

#[test]
fn metrics_from_a_trajectory_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let mut text = String::from("t,id,x,y,r\n");
    for k in 0..=40 {
        let t = k as f64 * 0.5;
        text.push_str(&format!("{t},0,{},10,1\n", 5.0 + 0.25 * t));
        text.push_str(&format!("{t},1,15,15,0.5\n"));
    }
    fs::write(&log, text).unwrap();
    let out = dir.path().join("m.csv");
    ok(&["metrics", "--log", s(&log), "--map-id", "walk", "--log-bounds", "20", "20", "--out", s(&out)]);
    let reports = read_metrics(&out).unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].map_id, "walk");
    let density = reports[0].raw[&Metric::ObstacleDensity];
    let expected = std::f64::consts::PI * (1.0 + 0.25) / 400.0;
    assert!((density - expected).abs() < 1e-12);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,id,x,y\n0,0,1,1\n").unwrap();
    assert_eq!(dyndiff(&["metrics", "--log", s(&bad), "--out", s(&out)]).status.code(), Some(1));
}
