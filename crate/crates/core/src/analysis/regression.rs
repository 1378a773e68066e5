use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricReport};
use crate::world::DynamicMap;

pub const N_RANGE: (usize, usize) = (10, 30);
pub const R_RANGE: (f64, f64) = (0.5, 1.5);
pub const V_RANGE: (f64, f64) = (2.0, 6.0);

/// Linear model of preprocessed survivability in obstacle count, radius and
/// speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionModel {
    pub coefficients: [f64; 4],
    pub residual_std: f64,
}

impl RegressionModel {
    pub fn predict(&self, n: f64, r: f64, v: f64) -> f64 {
        let [b0, b1, b2, b3] = self.coefficients;
        b0 + b1 * n + b2 * r + b3 * v
    }
}

/// Ordinary least squares of `s` on `(1, n, r, v)`.
pub fn fit_model(samples: &[(f64, f64, f64, f64)]) -> Result<RegressionModel> {
    let m = samples.len();
    if m < 4 {
        return Err(Error::RankDeficient);
    }
    let x = DMatrix::from_fn(m, 4, |i, j| match j {
        0 => 1.0,
        1 => samples[i].0,
        2 => samples[i].1,
        _ => samples[i].2,
    });
    let y = DVector::from_iterator(m, samples.iter().map(|s| s.3));
    // column scaling keeps the rank test independent of units
    let scale: Vec<f64> = (0..4)
        .map(|j| x.column(j).norm())
        .collect();
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient);
    }
    let xs = DMatrix::from_fn(m, 4, |i, j| x[(i, j)] / scale[j]);
    let svd = xs.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if smin <= smax * 1e-10 {
        return Err(Error::RankDeficient);
    }
    let beta = svd.solve(&y, 0.0).map_err(|_| Error::RankDeficient)?;
    let coefficients = [0, 1, 2, 3].map(|j| beta[j] / scale[j]);
    let residual = &y - &xs * &beta;
    let dof = (m - 4).max(1) as f64;
    Ok(RegressionModel {
        coefficients,
        residual_std: (residual.norm_squared() / dof).sqrt(),
    })
}

/// Fits the model on the maps that have a preprocessed survivability value,
/// using each map's obstacle count, mean radius and mean speed.
pub fn fit_survivability_model(reports: &[MetricReport], maps: &[DynamicMap]) -> Result<RegressionModel> {
    let by_id: BTreeMap<&str, &DynamicMap> = maps.iter().map(|m| (m.id.as_str(), m)).collect();
    let samples: Vec<(f64, f64, f64, f64)> = reports
        .iter()
        .filter_map(|r| {
            let s = *r.preprocessed.get(&Metric::Survivability)?;
            let m = by_id.get(r.map_id.as_str())?;
            Some((m.obstacle_count() as f64, m.mean_radius(), m.mean_speed(), s))
        })
        .collect();
    if samples.len() < reports.len() {
        log::warn!(
            "{} of {} metric reports had no matching map or survivability value",
            reports.len() - samples.len(),
            reports.len()
        );
    }
    fit_model(&samples)
}

/// Map parameters chosen to reach a target difficulty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Synthesis {
    pub n_obs: usize,
    pub r_obs: f64,
    pub v_obs: f64,
    /// `|f(n, r, v) - target|` at the returned parameters.
    pub objective: f64,
}

/// Best `(r, v)` in the box for `b2 * r + b3 * v` closest to `c`, with the
/// smallest `r` and then the smallest `v` among the minimizers.
fn best_rv(b2: f64, b3: f64, c: f64) -> (f64, f64) {
    let (r_lo, r_hi) = R_RANGE;
    let (v_lo, v_hi) = V_RANGE;
    let g = |r: f64, v: f64| b2 * r + b3 * v;
    let lo = g(if b2 > 0.0 { r_lo } else { r_hi }, if b3 > 0.0 { v_lo } else { v_hi });
    let hi = g(if b2 > 0.0 { r_hi } else { r_lo }, if b3 > 0.0 { v_hi } else { v_lo });
    if c >= hi || c <= lo {
        // saturated: the minimizers are the corner (or edge) at the extreme
        let up = c >= hi;
        let pick = |b: f64, (a, z): (f64, f64)| {
            if b == 0.0 {
                a
            } else if (b > 0.0) == up {
                z
            } else {
                a
            }
        };
        return (pick(b2, R_RANGE), pick(b3, V_RANGE));
    }
    // attainable: smallest r on the level set inside the box
    if b3 == 0.0 {
        return ((c / b2).clamp(r_lo, r_hi), v_lo);
    }
    // v(r) = (c - b2 r) / b3 must lie in [v_lo, v_hi]
    let r_at = |v: f64| if b2 == 0.0 { f64::NAN } else { (c - b3 * v) / b2 };
    let r = if b2 == 0.0 {
        r_lo
    } else {
        let (a, b) = (r_at(v_lo), r_at(v_hi));
        a.min(b).max(r_lo)
    };
    let v = ((c - b2 * r) / b3).clamp(v_lo, v_hi);
    (r, v)
}

/// Integer count in the allowed range and continuous radius and speed that
/// bring the model prediction closest to `target`. Ties prefer the smallest
/// count, then radius, then speed.
pub fn synthesize_map(model: &RegressionModel, target: f64) -> Synthesis {
    let [b0, b1, b2, b3] = model.coefficients;
    let mut best: Option<Synthesis> = None;
    for n in N_RANGE.0..=N_RANGE.1 {
        let c = target - b0 - b1 * n as f64;
        let (r, v) = best_rv(b2, b3, c);
        let gap = (model.predict(n as f64, r, v) - target).abs();
        // a residual at rounding level is an exact hit
        let tol = 1e-12 * (1.0 + target.abs() + c.abs());
        let objective = if gap <= tol { 0.0 } else { gap };
        if best.is_none_or(|b| objective < b.objective) {
            best = Some(Synthesis { n_obs: n, r_obs: r, v_obs: v, objective });
        }
    }
    best.expect("count range is non-empty")
}
