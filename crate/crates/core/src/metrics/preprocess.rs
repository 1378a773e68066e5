use std::collections::BTreeMap;

use super::{Metric, MetricReport};

/// Affine normalization range of one metric over a reference map set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBounds {
    pub min: f64,
    pub max: f64,
}

impl NormBounds {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut it = values.into_iter().peekable();
        it.peek()?;
        let (min, max) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(NormBounds { min, max })
    }

    pub fn is_degenerate(&self) -> bool {
        self.max <= self.min
    }

    /// Scales `raw` onto `[0, 10]` (clamped for values outside the reference
    /// range) and reflects reversed metrics. A degenerate range maps to 0.
    pub fn apply(&self, metric: Metric, raw: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let d = (10.0 * (raw - self.min) / (self.max - self.min)).clamp(0.0, 10.0);
        if metric.is_reversed() {
            10.0 - d
        } else {
            d
        }
    }
}

/// Fits normalization bounds over `reports` and fills in their preprocessed
/// values.
pub fn preprocess(reports: &mut [MetricReport]) -> BTreeMap<Metric, NormBounds> {
    let mut bounds = BTreeMap::new();
    for m in Metric::ALL {
        if let Some(b) = NormBounds::fit(reports.iter().filter_map(|r| r.raw.get(&m).copied())) {
            if b.is_degenerate() {
                log::warn!("{m}: every map has the same value {}; preprocessed values set to 0", b.min);
            }
            bounds.insert(m, b);
        }
    }
    preprocess_with(reports, &bounds);
    bounds
}

/// Projects `reports` with previously fitted bounds.
pub fn preprocess_with(reports: &mut [MetricReport], bounds: &BTreeMap<Metric, NormBounds>) {
    for r in reports {
        r.preprocessed = r
            .raw
            .iter()
            .filter_map(|(&m, &v)| bounds.get(&m).map(|b| (m, b.apply(m, v))))
            .collect();
    }
}
