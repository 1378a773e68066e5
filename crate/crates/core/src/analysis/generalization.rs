use std::collections::BTreeMap;

use super::{difficulty_bin, mean_std};
use crate::error::{Error, Result};
use crate::harness::{PairId, SuccessTable};
use crate::metrics::{Metric, MetricReport};

/// Success rate of one pair on one map, with the map's preprocessed
/// survivability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurvivalPoint {
    pub pair: PairId,
    pub difficulty: f64,
    pub success_rate: f64,
}

impl SurvivalPoint {
    /// Every (map, pair) cell of `table` whose map has a preprocessed
    /// survivability.
    pub fn collect(table: &SuccessTable, reports: &[MetricReport]) -> Vec<SurvivalPoint> {
        let d: BTreeMap<&str, f64> = reports
            .iter()
            .filter_map(|r| r.preprocessed.get(&Metric::Survivability).map(|&v| (r.map_id.as_str(), v)))
            .collect();
        table
            .cells
            .iter()
            .filter_map(|((m, pair), cell)| {
                Some(SurvivalPoint {
                    pair: *pair,
                    difficulty: *d.get(m.as_str())?,
                    success_rate: cell.rate(),
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneralizationReport {
    pub mean_distance: f64,
    pub frac_within_3sigma: f64,
    pub evaluated: usize,
    /// Held-out points without a usable fitted distribution.
    pub excluded: usize,
}

impl GeneralizationReport {
    pub fn coverage(&self) -> f64 {
        let total = self.evaluated + self.excluded;
        if total == 0 {
            0.0
        } else {
            self.evaluated as f64 / total as f64
        }
    }
}

/// Fits a Gaussian to the success rates of each pair within each difficulty
/// bin of `fit`, then measures how far each `holdout` point lies from the
/// distribution of its pair and bin, in standard deviations.
pub fn generalization_check(fit: &[SurvivalPoint], holdout: &[SurvivalPoint]) -> Result<GeneralizationReport> {
    if fit.is_empty() || holdout.is_empty() {
        return Err(Error::invalid("generalization check needs fit and held-out points"));
    }
    let mut groups: BTreeMap<(PairId, usize), Vec<f64>> = BTreeMap::new();
    for p in fit {
        groups.entry((p.pair, difficulty_bin(p.difficulty))).or_default().push(p.success_rate);
    }
    let gaussians: BTreeMap<(PairId, usize), (f64, f64)> = groups
        .into_iter()
        .filter_map(|(k, v)| mean_std(&v).map(|g| (k, g)))
        .collect();
    let mut distances = Vec::new();
    let mut excluded = 0;
    for p in holdout {
        match gaussians.get(&(p.pair, difficulty_bin(p.difficulty))) {
            Some(&(mu, sigma)) if sigma > 0.0 => distances.push((p.success_rate - mu).abs() / sigma),
            _ => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!(
            "{excluded} of {} held-out points fall in bins without a spread-out fit and were excluded",
            holdout.len()
        );
    }
    if distances.is_empty() {
        return Err(Error::invalid("no held-out point falls in a fitted bin"));
    }
    let n = distances.len() as f64;
    Ok(GeneralizationReport {
        mean_distance: distances.iter().sum::<f64>() / n,
        frac_within_3sigma: distances.iter().filter(|&&d| d <= 3.0).count() as f64 / n,
        evaluated: distances.len(),
        excluded,
    })
}
