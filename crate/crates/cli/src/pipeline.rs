//! Pipeline stages shared by the subcommands and `reproduce`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use dyndiff_core::analysis::{
    evaluate_metric, fit_survivability_model, group_by_velocity, EvaluationResult, RegressionModel,
};
use dyndiff_core::config::RunConfig;
use dyndiff_core::harness::{self, PairId, SuccessTable};
use dyndiff_core::metrics::{self, Metric, MetricParams, MetricReport, NormBounds};
use dyndiff_core::planning::{GazePolicy, PlannerKind};
use dyndiff_core::world::{
    generate_dataset_i, generate_dataset_ii, mapfile, DatasetIIKind, DatasetIParams, DynamicMap, MapSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dataset {
    I,
    IIa,
    IIb,
    IIc,
}

impl Dataset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "I" => Some(Dataset::I),
            "IIa" => Some(Dataset::IIa),
            "IIb" => Some(Dataset::IIb),
            "IIc" => Some(Dataset::IIc),
            _ => None,
        }
    }

    fn kind(self) -> Option<DatasetIIKind> {
        match self {
            Dataset::I => None,
            Dataset::IIa => Some(DatasetIIKind::A),
            Dataset::IIb => Some(DatasetIIKind::B),
            Dataset::IIc => Some(DatasetIIKind::C),
        }
    }
}

/// Map specs of a dataset. `count` is seeds per cell for dataset I and the
/// number of maps for the others.
pub fn dataset_specs(dataset: Dataset, count: usize, seed: u64) -> Result<Vec<MapSpec>> {
    Ok(match dataset.kind() {
        None => generate_dataset_i(&DatasetIParams {
            seeds_per_cell: count,
            base_seed: seed,
            ..DatasetIParams::default()
        })?,
        Some(kind) => generate_dataset_ii(kind, count, seed)?,
    })
}

/// Expands `specs` and writes one map file per spec into `dir`.
pub fn write_maps(specs: &[MapSpec], dir: &Path) -> Result<Vec<DynamicMap>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut maps = Vec::with_capacity(specs.len());
    for spec in specs {
        let map = spec.expand()?;
        mapfile::write(&map, &dir.join(format!("{}.toml", map.id)))?;
        maps.push(map);
    }
    Ok(maps)
}

pub fn load_maps(dir: &Path) -> Result<Vec<Arc<DynamicMap>>> {
    let maps = mapfile::read_dir(dir).with_context(|| format!("reading maps from {}", dir.display()))?;
    if maps.is_empty() {
        bail!("no map files (*.toml) in {}", dir.display());
    }
    Ok(maps.into_iter().map(Arc::new).collect())
}

/// Cross product of planners and gazes, planners outermost.
pub fn pairs(planners: &[PlannerKind], gazes: &[GazePolicy]) -> Vec<PairId> {
    planners
        .iter()
        .flat_map(|&p| gazes.iter().map(move |&g| (p, g)))
        .collect()
}

/// Writes to a sibling temporary file and renames it into place, so that an
/// interrupted stage never leaves a complete-looking output behind.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    write(&tmp)?;
    fs::rename(&tmp, path).with_context(|| format!("moving output into {}", path.display()))?;
    Ok(())
}

/// Runs every trial and writes the per-trial results and the success table.
pub fn run_trials(
    maps: &[Arc<DynamicMap>],
    pairs: &[PairId],
    cfg: &RunConfig,
    jobs: usize,
    results: &Path,
    success: &Path,
) -> Result<SuccessTable> {
    let report = harness::run_matrix(maps, pairs, cfg, jobs)?;
    if let Some(f) = report.failures.first() {
        bail!(
            "{} trials failed; first: map {} {}-{} from {:?} to {:?}: {}",
            report.failures.len(),
            f.trial.map_id,
            f.trial.planner,
            f.trial.gaze,
            f.trial.start,
            f.trial.goal,
            f.message
        );
    }
    let table = report.table();
    write_atomic(results, |p| Ok(harness::write_results(&report.records, p)?))?;
    write_atomic(success, |p| Ok(harness::write_success(&table, p)?))?;
    Ok(table)
}

/// Raw metrics of every map, preprocessed either over the set itself or
/// with given reference bounds.
pub fn compute_metrics(
    maps: &[Arc<DynamicMap>],
    params: &MetricParams,
    jobs: usize,
    reference: Option<&BTreeMap<Metric, NormBounds>>,
) -> Result<(Vec<MetricReport>, BTreeMap<Metric, NormBounds>)> {
    let (mut reports, bounds) = metrics::evaluate_maps(maps, params, jobs)?;
    match reference {
        Some(b) => {
            metrics::preprocess_with(&mut reports, b);
            Ok((reports, b.clone()))
        }
        None => Ok((reports, bounds)),
    }
}

/// Evaluates every metric, pooled or per obstacle speed.
pub fn evaluate_all(
    table: &SuccessTable,
    reports: &[MetricReport],
    by_velocity: Option<&[DynamicMap]>,
) -> Result<Vec<(String, EvaluationResult)>> {
    let mut out = Vec::new();
    for m in Metric::ALL {
        match by_velocity {
            None => out.push((m.to_string(), evaluate_metric(table, reports, m)?)),
            Some(maps) => {
                for (v, e) in group_by_velocity(table, maps, reports, m)? {
                    out.push((format!("{m}@v={v}"), e));
                }
            }
        }
    }
    Ok(out)
}

pub fn fit(reports: &[MetricReport], maps: &[Arc<DynamicMap>]) -> Result<RegressionModel> {
    let plain: Vec<DynamicMap> = maps.iter().map(|m| (**m).clone()).collect();
    Ok(fit_survivability_model(reports, &plain)?)
}
