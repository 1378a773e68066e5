use std::path::Path;

use super::{Outcome, SuccessCell, SuccessTable, TrialRecord, TrialSpec};
use crate::error::{Error, Result};
use crate::geometry::Vec2;

const RESULTS_HEADER: [&str; 10] = [
    "map_id",
    "planner",
    "gaze",
    "start",
    "goal",
    "v_cruise",
    "outcome",
    "duration",
    "min_clearance",
    "replans",
];

const SUCCESS_HEADER: [&str; 5] = ["map_id", "planner", "gaze", "success_rate", "trial_count"];

fn point(p: Vec2) -> String {
    format!("{};{}", p.x, p.y)
}

fn parse_point(s: &str) -> Result<Vec2> {
    let (x, y) = s
        .split_once(';')
        .ok_or_else(|| Error::Parse(format!("expected \"x;y\", got {s:?}")))?;
    Ok(Vec2::new(parse_f64(x)?, parse_f64(y)?))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

pub fn write_results(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        let t = &r.trial;
        w.write_record([
            t.map_id.clone(),
            t.planner.to_string(),
            t.gaze.to_string(),
            point(t.start),
            point(t.goal),
            t.v_cruise.to_string(),
            r.outcome.to_string(),
            r.duration.to_string(),
            r.min_clearance.to_string(),
            r.replan_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results file; `time_limit` is not stored per row and is filled in.
pub fn read_results(path: &Path, time_limit: f64) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse(format!("unexpected results header in {}", path.display())));
    }
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        out.push(TrialRecord {
            trial: TrialSpec {
                map_id: f(0).to_string(),
                planner: f(1).parse()?,
                gaze: f(2).parse()?,
                start: parse_point(f(3))?,
                goal: parse_point(f(4))?,
                v_cruise: parse_f64(f(5))?,
                time_limit,
            },
            outcome: f(6).parse::<Outcome>()?,
            duration: parse_f64(f(7))?,
            min_clearance: parse_f64(f(8))?,
            replan_count: f(9)
                .parse()
                .map_err(|_| Error::Parse(format!("bad replan count {:?}", f(9))))?,
        });
    }
    Ok(out)
}

pub fn write_success(table: &SuccessTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUCCESS_HEADER)?;
    for ((map, (planner, gaze)), cell) in &table.cells {
        w.write_record([
            map.clone(),
            planner.to_string(),
            gaze.to_string(),
            cell.rate().to_string(),
            cell.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_success(path: &Path) -> Result<SuccessTable> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut table = SuccessTable::default();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let rate = parse_f64(f(3))?;
        let trials: u32 = f(4)
            .parse()
            .map_err(|_| Error::Parse(format!("bad trial count {:?}", f(4))))?;
        table.cells.insert(
            (f(0).to_string(), (f(1).parse()?, f(2).parse()?)),
            SuccessCell {
                successes: (rate * trials as f64).round() as u32,
                trials,
            },
        );
    }
    Ok(table)
}
