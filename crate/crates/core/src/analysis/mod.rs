//! Statistics that validate difficulty metrics against planner success rates,
//! plus the survivability regression and map synthesis built on it.

mod generalization;
mod io;
mod regression;


use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::harness::{PairId, SuccessTable};
use crate::metrics::{Metric, MetricReport};
use crate::world::DynamicMap;

pub use generalization::{generalization_check, GeneralizationReport, SurvivalPoint};
pub use io::{read_model, write_evaluations, write_model};
pub use regression::{
    fit_model, fit_survivability_model, synthesize_map, RegressionModel, Synthesis, N_RANGE, R_RANGE,
    V_RANGE,
};

/// Number of unit-width difficulty bins on the `[0, 10]` scale.
pub const BINS: usize = 10;

/// Bin of a preprocessed difficulty value; 10 belongs to the last bin.
pub fn difficulty_bin(d: f64) -> usize {
    (d.max(0.0).floor() as usize).min(BINS - 1)
}

/// Ranks starting at 1, ties sharing the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Twice the average ranks, so that tied ranks stay integral.
fn doubled_ranks(x: &[f64]) -> Vec<i128> {
    average_ranks(x).into_iter().map(|r| (2.0 * r) as i128).collect()
}

/// Spearman rank correlation: Pearson correlation of the average ranks,
/// accumulated in exact integer arithmetic.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "spearman needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::invalid("spearman needs at least 3 points"));
    }
    let (a, b) = (doubled_ranks(x), doubled_ranks(y));
    let n = a.len() as i128;
    let (sa, sb) = (a.iter().sum::<i128>(), b.iter().sum::<i128>());
    let sab: i128 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
    let saa: i128 = a.iter().map(|p| p * p).sum();
    let sbb: i128 = b.iter().map(|q| q * q).sum();
    let cov = n * sab - sa * sb;
    let (va, vb) = (n * saa - sa * sa, n * sbb - sb * sb);
    if va == 0 {
        return Err(Error::UndefinedCorrelation("first sequence is constant"));
    }
    if vb == 0 {
        return Err(Error::UndefinedCorrelation("second sequence is constant"));
    }
    Ok((cov as f64 / (va as f64 * vb as f64).sqrt()).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation; `None` for an empty slice.
pub fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    if v.iter().all(|&x| x == v[0]) {
        return Some((v[0], 0.0));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Coefficient of variation of success rates inside one difficulty bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CvCell {
    pub pair: PairId,
    pub bin: usize,
    pub maps: usize,
    pub cv: f64,
}

/// How well one metric explains success rates across planner-gaze pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationResult {
    pub metric: Metric,
    /// Signed correlation between preprocessed difficulty and success rate.
    pub srcc_per_pair: Vec<(PairId, f64)>,
    /// Mean and spread of `|srcc|` over the pairs.
    pub srcc_mean: f64,
    pub srcc_std: f64,
    /// Mean of the signed correlations.
    pub srcc_signed_mean: f64,
    pub cv_per_group: Vec<CvCell>,
    pub cv_mean: f64,
    pub cv_std: f64,
}

impl EvaluationResult {
    /// Mean CV of one pair over its bins.
    pub fn pair_cv(&self, pair: PairId) -> Option<f64> {
        let v: Vec<f64> = self.cv_per_group.iter().filter(|c| c.pair == pair).map(|c| c.cv).collect();
        mean_std(&v).map(|(m, _)| m)
    }
}

fn difficulty_of(reports: &[MetricReport], metric: Metric) -> BTreeMap<&str, f64> {
    reports
        .iter()
        .filter_map(|r| r.preprocessed.get(&metric).map(|&d| (r.map_id.as_str(), d)))
        .collect()
}

/// Correlation and binned dispersion of success rates against one metric.
/// Only maps present in both the table and the reports are used.
pub fn evaluate_metric(table: &SuccessTable, reports: &[MetricReport], metric: Metric) -> Result<EvaluationResult> {
    let difficulty = difficulty_of(reports, metric);
    for map in table.maps() {
        if !difficulty.contains_key(map.as_str()) {
            return Err(Error::invalid(format!("map {map} has no preprocessed {metric} value")));
        }
    }
    let mut srcc_per_pair = Vec::new();
    let mut cv_per_group = Vec::new();
    for pair in table.pairs() {
        let points: Vec<(f64, f64)> = table
            .cells
            .iter()
            .filter(|((_, p), _)| *p == pair)
            .map(|((m, _), cell)| (difficulty[m.as_str()], cell.rate()))
            .collect();
        let (d, sr): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
        match spearman(&d, &sr) {
            Ok(rho) => srcc_per_pair.push((pair, rho)),
            Err(e) => log::warn!("{metric}: {}-{} excluded from the correlation: {e}", pair.0, pair.1),
        }
        let mut bins: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &(d, r) in &points {
            bins.entry(difficulty_bin(d)).or_default().push(r);
        }
        for (bin, rates) in bins {
            if rates.len() < 2 {
                continue;
            }
            let (mu, sigma) = mean_std(&rates).expect("non-empty");
            if mu <= 0.0 {
                log::warn!("{metric}: {}-{} bin {bin} has zero mean success; CV skipped", pair.0, pair.1);
                continue;
            }
            cv_per_group.push(CvCell { pair, bin, maps: rates.len(), cv: sigma / mu });
        }
    }
    let abs: Vec<f64> = srcc_per_pair.iter().map(|(_, r)| r.abs()).collect();
    let signed: Vec<f64> = srcc_per_pair.iter().map(|(_, r)| *r).collect();
    let cvs: Vec<f64> = cv_per_group.iter().map(|c| c.cv).collect();
    let (srcc_mean, srcc_std) = mean_std(&abs).unwrap_or((f64::NAN, f64::NAN));
    let (cv_mean, cv_std) = mean_std(&cvs).unwrap_or((f64::NAN, f64::NAN));
    Ok(EvaluationResult {
        metric,
        srcc_per_pair,
        srcc_mean,
        srcc_std,
        srcc_signed_mean: mean_std(&signed).map(|(m, _)| m).unwrap_or(f64::NAN),
        cv_per_group,
        cv_mean,
        cv_std,
    })
}

/// Evaluates `metric` separately on maps sharing the same obstacle speed.
/// Returns `(speed, result)` in increasing speed order; partitions with
/// fewer than 3 maps are skipped.
pub fn group_by_velocity(
    table: &SuccessTable,
    maps: &[DynamicMap],
    reports: &[MetricReport],
    metric: Metric,
) -> Result<Vec<(f64, EvaluationResult)>> {
    // speeds keyed in mm/s so that quantized map speeds group together
    let mut groups: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    for m in maps {
        groups.entry((m.mean_speed() * 1e3).round() as i64).or_default().push(&m.id);
    }
    let mut out = Vec::new();
    for (key, ids) in groups {
        let speed = key as f64 / 1e3;
        let sub = SuccessTable {
            cells: table
                .cells
                .iter()
                .filter(|((m, _), _)| ids.contains(&m.as_str()))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        };
        let n = sub.maps().len();
        if n < 3 {
            if n > 0 {
                log::warn!("speed {speed} m/s has only {n} evaluated maps; skipped");
            }
            continue;
        }
        out.push((speed, evaluate_metric(&sub, reports, metric)?));
    }
    Ok(out)
}
