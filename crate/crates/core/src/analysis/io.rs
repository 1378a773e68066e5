use std::path::Path;

use super::{EvaluationResult, RegressionModel};
use crate::error::{Error, Result};

const EVAL_HEADER: [&str; 5] = ["metric", "planner", "gaze", "srcc", "cv_mean"];

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(|x| x.to_string()).unwrap_or_default()
}

/// Writes one row per planner-gaze pair (signed SRCC, mean CV over that
/// pair's bins) followed by `summary,mean` and `summary,std` rows holding
/// the spread of `|srcc|` and of CV across all cells. `label` names each
/// result in the metric column.
pub fn write_evaluations(results: &[(String, EvaluationResult)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EVAL_HEADER)?;
    for (label, e) in results {
        for &(pair, rho) in &e.srcc_per_pair {
            w.write_record([
                label.clone(),
                pair.0.to_string(),
                pair.1.to_string(),
                rho.to_string(),
                opt(e.pair_cv(pair)),
            ])?;
        }
        w.write_record([label.clone(), "summary".into(), "mean".into(), opt(Some(e.srcc_mean)), opt(Some(e.cv_mean))])?;
        w.write_record([label.clone(), "summary".into(), "std".into(), opt(Some(e.srcc_std)), opt(Some(e.cv_std))])?;
    }
    w.flush()?;
    Ok(())
}

const MODEL_KEYS: [&str; 5] = ["beta0", "beta1", "beta2", "beta3", "residual_std"];

pub fn write_model(model: &RegressionModel, path: &Path) -> Result<()> {
    let values = [
        model.coefficients[0],
        model.coefficients[1],
        model.coefficients[2],
        model.coefficients[3],
        model.residual_std,
    ];
    let mut text = String::from("# S = beta0 + beta1 * n_obs + beta2 * r_obs + beta3 * v_obs\n");
    for (k, v) in MODEL_KEYS.iter().zip(values) {
        text.push_str(&format!("{k} = {v}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<RegressionModel> {
    let text = std::fs::read_to_string(path)?;
    let mut values = [None; 5];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("model line {}: expected key = value", i + 1)))?;
        let slot = MODEL_KEYS
            .iter()
            .position(|&m| m == k.trim())
            .ok_or_else(|| Error::Parse(format!("model line {}: unknown key {:?}", i + 1, k.trim())))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("model line {}: bad number {:?}", i + 1, v.trim())))?;
        values[slot] = Some(x);
    }
    let get = |i: usize| values[i].ok_or_else(|| Error::Parse(format!("model is missing {}", MODEL_KEYS[i])));
    Ok(RegressionModel {
        coefficients: [get(0)?, get(1)?, get(2)?, get(3)?],
        residual_std: get(4)?,
    })
}
