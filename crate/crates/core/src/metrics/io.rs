use std::collections::BTreeMap;
use std::path::Path;

use super::{Metric, MetricReport, NormBounds};
use crate::error::{Error, Result};

const METRICS_HEADER: [&str; 4] = ["map_id", "metric", "raw", "preprocessed"];
const BOUNDS_HEADER: [&str; 3] = ["metric", "min", "max"];

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

fn check_header(rd: &mut csv::Reader<std::fs::File>, expected: &[&str], path: &Path) -> Result<()> {
    if rd.headers()?.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected header {}",
            path.display(),
            expected.join(",")
        )));
    }
    Ok(())
}

/// One row per map and metric; an empty `preprocessed` cell means the value
/// was not normalized.
pub fn write_metrics(reports: &[MetricReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METRICS_HEADER)?;
    for r in reports {
        for (m, raw) in &r.raw {
            let pre = r.preprocessed.get(m).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([r.map_id.clone(), m.to_string(), raw.to_string(), pre])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a metrics file, keeping the map order of first appearance.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricReport>> {
    let mut rd = csv::Reader::from_path(path)?;
    check_header(&mut rd, &METRICS_HEADER, path)?;
    let mut out: Vec<MetricReport> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        let id = f(0).to_string();
        let i = *index.entry(id.clone()).or_insert_with(|| {
            out.push(MetricReport {
                map_id: id,
                raw: BTreeMap::new(),
                preprocessed: BTreeMap::new(),
            });
            out.len() - 1
        });
        let m: Metric = f(1).parse()?;
        out[i].raw.insert(m, parse_f64(f(2))?);
        if !f(3).trim().is_empty() {
            out[i].preprocessed.insert(m, parse_f64(f(3))?);
        }
    }
    Ok(out)
}

pub fn write_bounds(bounds: &BTreeMap<Metric, NormBounds>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(BOUNDS_HEADER)?;
    for (m, b) in bounds {
        w.write_record([m.to_string(), b.min.to_string(), b.max.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bounds(path: &Path) -> Result<BTreeMap<Metric, NormBounds>> {
    let mut rd = csv::Reader::from_path(path)?;
    check_header(&mut rd, &BOUNDS_HEADER, path)?;
    let mut out = BTreeMap::new();
    for row in rd.records() {
        let row = row?;
        let f = |i: usize| row.get(i).unwrap_or("");
        out.insert(
            f(0).parse()?,
            NormBounds {
                min: parse_f64(f(1))?,
                max: parse_f64(f(2))?,
            },
        );
    }
    Ok(out)
}
