//! The `dyndiff` command line: map generation, trial matrices, difficulty
//! metrics, metric validation and map synthesis.

pub mod pipeline;
pub mod reproduce;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dyndiff_core::analysis::{read_model, synthesize_map, write_evaluations, write_model};
use dyndiff_core::config::RunConfig;
use dyndiff_core::harness::read_results;
use dyndiff_core::harness::SuccessTable;
use dyndiff_core::metrics::{self, MetricParams, MetricReport, Timeline};
use dyndiff_core::planning::{GazePolicy, PlannerKind};
use dyndiff_core::world::mapfile;
use dyndiff_core::Bounds;

use pipeline::Dataset;

#[derive(Debug, Parser)]
#[command(name = "dyndiff", version, about = "Dynamic-obstacle benchmarking and map difficulty metrics")]
pub struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Base seed for map generation (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run configuration in TOML.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a map dataset.
    GenMaps(GenMapsArgs),
    /// Run the trial matrix of every map and planner-gaze pair.
    Run(RunArgs),
    /// Compute the difficulty metrics of every map.
    Metrics(MetricsArgs),
    /// Correlate metrics with success rates.
    Analyze(AnalyzeArgs),
    /// Fit the survivability regression.
    Fit(FitArgs),
    /// Build a map whose predicted survivability matches a target.
    SynthMap(SynthArgs),
    /// Run the whole pipeline and report on the acceptance criteria.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct GenMapsArgs {
    /// I, IIa, IIb or IIc.
    #[arg(long, value_parser = parse_dataset)]
    pub dataset: Dataset,
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds per cell for dataset I, number of maps otherwise.
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = ["global-primitive", "mpc", "local-primitive"])]
    pub planners: Vec<PlannerKind>,
    #[arg(long, value_delimiter = ',', default_values = ["full-range", "look-ahead"])]
    pub gazes: Vec<GazePolicy>,
    #[arg(long)]
    pub out: PathBuf,
    /// Success table output (defaults to success.csv next to the results).
    #[arg(long)]
    pub success: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Directory of map files.
    #[arg(long, required_unless_present = "log", conflicts_with = "log")]
    pub maps: Option<PathBuf>,
    /// Recorded obstacle trajectories (`t,id,x,y,r`) instead of maps.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Map id reported for a log.
    #[arg(long, default_value = "log", requires = "log")]
    pub map_id: String,
    /// Width and height of the logged area in meters.
    #[arg(long, num_args = 2, value_names = ["W", "H"], requires = "log")]
    pub log_bounds: Option<Vec<f64>>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub d_sample: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Normalize with previously saved bounds instead of fitting new ones.
    #[arg(long)]
    pub bounds: Option<PathBuf>,
    /// Where to save the fitted bounds (defaults to bounds.csv next to the output).
    #[arg(long)]
    pub bounds_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    Velocity,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, requires = "maps")]
    pub group_by: Option<GroupBy>,
    /// Map directory, needed to group by obstacle speed.
    #[arg(long)]
    pub maps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub maps: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub target: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// desk or smoke.
    #[arg(long, default_value = "desk", value_parser = parse_scale)]
    pub scale: reproduce::Scale,
    #[arg(long, default_value = "reproduce")]
    pub out: PathBuf,
    /// Recompute stages whose outputs already exist.
    #[arg(long)]
    pub force: bool,
}

fn parse_dataset(s: &str) -> Result<Dataset, String> {
    Dataset::parse(s).ok_or_else(|| format!("unknown dataset {s:?}; expected I, IIa, IIb or IIc"))
}

fn parse_scale(s: &str) -> Result<reproduce::Scale, String> {
    reproduce::Scale::parse(s).ok_or_else(|| format!("unknown scale {s:?}; expected desk or smoke"))
}

/// Failure kinds with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 2).
    Usage(anyhow::Error),
    /// A pipeline stage failed (exit code 1).
    Stage(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Stage(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Stage(e) => write!(f, "{e:#}"),
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Metrics(m) = &cli.command {
        if let Some(d) = m.d_sample {
            cfg.d_sample = d;
        }
        if let Some(t) = m.t_max {
            cfg.t_max = t;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = effective_config(&cli).map_err(CliError::Usage)?;
    let jobs = cli.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(CliError::Usage(anyhow::anyhow!("--jobs must be at least 1")));
    }
    execute(cli.command, &cfg, jobs).map_err(CliError::Stage)
}

fn execute(command: Command, cfg: &RunConfig, jobs: usize) -> Result<()> {
    match command {
        Command::GenMaps(a) => {
            let count = a.seeds.unwrap_or(match a.dataset {
                Dataset::I => cfg.seeds_per_cell,
                _ => cfg.dataset_ii_maps,
            });
            let specs = pipeline::dataset_specs(a.dataset, count, cfg.seed)?;
            let maps = pipeline::write_maps(&specs, &a.out)?;
            println!("wrote {} maps to {}", maps.len(), a.out.display());
        }
        Command::Run(a) => {
            let maps = pipeline::load_maps(&a.maps)?;
            let pairs = pipeline::pairs(&a.planners, &a.gazes);
            let success = a.success.unwrap_or_else(|| sibling(&a.out, "success.csv"));
            pipeline::run_trials(&maps, &pairs, cfg, jobs, &a.out, &success)?;
            println!(
                "ran {} maps x {} pairs; results in {}, success rates in {}",
                maps.len(),
                pairs.len(),
                a.out.display(),
                success.display()
            );
        }
        Command::Metrics(a) => metrics_command(a, cfg, jobs)?,
        Command::Analyze(a) => {
            let records = read_results(&a.results, cfg.time_limit)?;
            let table = SuccessTable::from_records(&records);
            let reports = metrics::read_metrics(&a.metrics)?;
            let maps = match (a.group_by, &a.maps) {
                (Some(GroupBy::Velocity), Some(dir)) => Some(
                    pipeline::load_maps(dir)?
                        .iter()
                        .map(|m| (**m).clone())
                        .collect::<Vec<_>>(),
                ),
                _ => None,
            };
            let evals = pipeline::evaluate_all(&table, &reports, maps.as_deref())?;
            write_evaluations(&evals, &a.out)?;
            for (label, e) in &evals {
                println!("{label:<36} |srcc| {:.3} +- {:.3}  cv {:.3} +- {:.3}", e.srcc_mean, e.srcc_std, e.cv_mean, e.cv_std);
            }
        }
        Command::Fit(a) => {
            let reports = metrics::read_metrics(&a.metrics)?;
            let maps = pipeline::load_maps(&a.maps)?;
            let model = pipeline::fit(&reports, &maps)?;
            write_model(&model, &a.out)?;
            let [b0, b1, b2, b3] = model.coefficients;
            println!("S = {b0:.4} + {b1:.4} n + {b2:.4} r + {b3:.4} v (residual std {:.4})", model.residual_std);
        }
        Command::SynthMap(a) => {
            let model = read_model(&a.model)?;
            let s = synthesize_map(&model, a.target);
            let map = reproduce::synthesized_spec(s.n_obs, s.r_obs, s.v_obs, cfg.seed).expand()?;
            mapfile::write(&map, &a.out)?;
            println!(
                "n_obs = {}, r_obs = {}, v_obs = {}, |f - target| = {}",
                s.n_obs, s.r_obs, s.v_obs, s.objective
            );
        }
        Command::Reproduce(a) => {
            let out = reproduce::reproduce(&a.out, &a.scale, cfg, jobs, a.force)?;
            for c in &out.checks {
                println!("{c}");
            }
            println!("outputs in {}", out.dir.display());
        }
    }
    Ok(())
}

fn metrics_command(a: MetricsArgs, cfg: &RunConfig, jobs: usize) -> Result<()> {
    let params = MetricParams::from_config(cfg);
    let reference = a.bounds.as_deref().map(metrics::read_bounds).transpose()?;
    let (reports, bounds): (Vec<MetricReport>, _) = match (&a.maps, &a.log) {
        (Some(dir), _) => {
            let maps = pipeline::load_maps(dir)?;
            let (r, b) = pipeline::compute_metrics(&maps, &params, jobs, reference.as_ref())?;
            (r, Some(b))
        }
        (None, Some(log)) => {
            let b = match a.log_bounds.as_deref() {
                Some(&[w, h]) => Bounds::new(w, h),
                _ => Bounds::new(cfg.map_size, cfg.map_size),
            };
            let tl = Timeline::read_log(log, b)?;
            let mut reports = vec![metrics::raw_report(&a.map_id, &tl, &params)];
            if let Some(reference) = &reference {
                metrics::preprocess_with(&mut reports, reference);
            }
            (reports, None)
        }
        (None, None) => unreachable!("clap requires --maps or --log"),
    };
    metrics::write_metrics(&reports, &a.out)?;
    if let (Some(b), None) = (bounds, &a.bounds) {
        let path = a.bounds_out.unwrap_or_else(|| sibling(&a.out, "bounds.csv"));
        metrics::write_bounds(&b, &path)?;
    }
    println!("wrote metrics of {} maps to {}", reports.len(), a.out.display());
    Ok(())
}
