//! The four subcommands, callable as library functions.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use succmax_core::sampling::mix_seed;
use succmax_core::{run, Allocation, PolicyCellStats, SuccessRegion};
use succmax_data::{
    estimate_stats, fit_bucketizer, generate_synthetic, ingest_csv, split_train_test, BootstrapSpec,
    BucketizerSpec, Estimand, Normalization, RctDataset, SyntheticConfig, BUCKET_FEATURE,
};

use crate::config::{ExperimentConfig, Source, Task, SEED_BOOTSTRAP, SEED_SPLIT, SEED_SYNTHETIC};
use crate::error::{CliError, Result};
use crate::svg;
use crate::sweep::{self, run_sweep, SweepRow, SweepSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub format: Format,
    pub deterministic: bool,
}

impl RunOptions {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Self { out: out.into(), format: Format::Csv, deterministic: false }
    }
}

/// Train (and, for CSV sources, test) statistics of a config's source.
pub struct LoadedStats {
    pub train: PolicyCellStats<f64>,
    pub test: Option<PolicyCellStats<f64>>,
    pub bucketizer: Option<BucketizerSpec>,
}

pub fn load_stats(cfg: &ExperimentConfig) -> Result<LoadedStats> {
    match &cfg.source {
        Source::Synthetic { preset, n_samples_per_cell, estimate, n_bootstrap } => {
            if !estimate {
                return Ok(LoadedStats { train: preset.stats()?, test: None, bucketizer: None });
            }
            let syn = SyntheticConfig {
                preset: preset.clone(),
                n_samples_per_cell: *n_samples_per_cell,
                seed: mix_seed(cfg.seed, SEED_SYNTHETIC),
            };
            let (truth, data) = generate_synthetic(&syn)?;
            let b = fit_bucketizer(&data, BUCKET_FEATURE, truth.shape().n_buckets)?;
            let spec = BootstrapSpec::new(*n_bootstrap, mix_seed(cfg.seed, SEED_BOOTSTRAP));
            let train = estimate_stats(&data, &b, &spec, Estimand::PerRealization, Normalization::RawTotal)?;
            Ok(LoadedStats { train, test: None, bucketizer: Some(b) })
        }
        Source::StatsJson { path } => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let stats = PolicyCellStats::from_json(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            Ok(LoadedStats { train: stats, test: None, bucketizer: None })
        }
        Source::Csv { path, columns, bucket_feature, n_buckets, n_bootstrap, normalization, train_fraction } => {
            let data = ingest_csv(path, columns).map_err(|e| CliError::from(e).in_file(path))?;
            let (train, test) = split_train_test(&data, *train_fraction, mix_seed(cfg.seed, SEED_SPLIT))?;
            let b = fit_bucketizer(&train, bucket_feature, *n_buckets)?;
            let spec = BootstrapSpec::new(*n_bootstrap, mix_seed(cfg.seed, SEED_BOOTSTRAP));
            let est = |d: &RctDataset, what: &str| {
                estimate_stats(d, &b, &spec, Estimand::BucketTotal, *normalization)
                    .map_err(|e| CliError::from(e).context(&format!("{what} split")))
            };
            Ok(LoadedStats { train: est(&train, "train")?, test: Some(est(&test, "test")?), bucketizer: Some(b) })
        }
    }
}

impl CliError {
    fn context(self, what: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }

    fn in_file(self, path: &Path) -> Self {
        self.context(&path.display().to_string())
    }
}

fn check_grid_dim(cfg: &ExperimentConfig, stats: &PolicyCellStats<f64>) -> Result<Vec<SuccessRegion<f64>>> {
    let grid = cfg.grid.as_ref().expect("validated");
    if grid.dim() != stats.dim() {
        return Err(CliError::Config(format!(
            "grid is {}-D but the outcome is {}-D",
            grid.dim(),
            stats.dim()
        )));
    }
    grid.points()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Writes `sweep.csv` (or `sweep.json`), `sweep_errors.csv` and, when
/// enabled, `sweep.svg`. Returns the rows.
pub fn cmd_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<SweepRow>> {
    cfg.validate(Task::Sweep)?;
    let stats = load_stats(cfg)?.train;
    let points = check_grid_dim(cfg, &stats)?;
    let settings = SweepSettings {
        methods: &cfg.methods,
        value_projection: cfg.value_projection,
        deterministic: opts.deterministic,
    };
    let dim = stats.dim();
    let rows = run_sweep(&stats, &points, &settings, |i| cfg.optimizer_for_point(dim, i));

    create_dir(&opts.out)?;
    let shape = stats.shape();
    match opts.format {
        Format::Csv => sweep::write_csv(create(&opts.out.join("sweep.csv"))?, &rows, shape.n_buckets, shape.n_policies, dim)?,
        Format::Json => write_file(&opts.out.join("sweep.json"), &sweep::to_json(&rows))?,
    }
    sweep::write_errors_csv(create(&opts.out.join("sweep_errors.csv"))?, &rows, dim)?;
    if cfg.output.svg {
        write_file(&opts.out.join("sweep.svg"), &svg::render(&rows, &cfg.methods))?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub region: SuccessRegion<f64>,
    pub psi_init: Allocation<f64>,
    pub psi_final: Allocation<f64>,
    pub criterion_final: f64,
    pub stalled: bool,
    #[serde(skip)]
    pub trace: Vec<(usize, f64)>,
}

/// Writes `allocation.json` and `trace.csv` (or `trace.json`).
pub fn cmd_optimize(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<OptimizeReport> {
    cfg.validate(Task::Optimize)?;
    let stats = load_stats(cfg)?.train;
    let region = check_grid_dim(cfg, &stats)?[0];
    let out = run(&stats, &region, &cfg.optimizer_for_point(stats.dim(), 0))?;
    let report = OptimizeReport {
        region,
        psi_init: out.psi_init,
        psi_final: out.psi_final,
        criterion_final: out.criterion_final.p,
        stalled: out.stalled,
        trace: out.trace,
    };
    create_dir(&opts.out)?;
    write_file(&opts.out.join("allocation.json"), &serde_json::to_string_pretty(&report).expect("report serializes"))?;
    match opts.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(create(&opts.out.join("trace.csv"))?);
            let data_err = |e: csv::Error| CliError::Data(e.to_string());
            w.write_record(["step", "criterion"]).map_err(data_err)?;
            for (step, c) in &report.trace {
                w.write_record([step.to_string(), c.to_string()]).map_err(data_err)?;
            }
            w.flush().map_err(|e| CliError::Data(e.to_string()))?;
        }
        Format::Json => {
            let text = serde_json::to_string(&report.trace).expect("trace serializes");
            write_file(&opts.out.join("trace.json"), &text)?;
        }
    }
    Ok(report)
}

/// Writes `stats_train.json`, `stats_test.json` and `bucketizer.json`.
pub fn cmd_ingest(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<LoadedStats> {
    cfg.validate(Task::Ingest)?;
    let loaded = load_stats(cfg)?;
    create_dir(&opts.out)?;
    write_file(&opts.out.join("stats_train.json"), &loaded.train.to_json())?;
    write_file(&opts.out.join("stats_test.json"), &loaded.test.as_ref().expect("csv source").to_json())?;
    let b = serde_json::to_string_pretty(&loaded.bucketizer).expect("bucketizer serializes");
    write_file(&opts.out.join("bucketizer.json"), &b)?;
    Ok(loaded)
}

/// Writes `stats_truth.json`, the sampled rows as `synthetic.csv` (columns
/// `bucket,treatment,value[,cost]`) and, with `estimate`, the bootstrap
/// estimate as `stats_estimated.json`.
pub fn cmd_gen_synthetic(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<PolicyCellStats<f64>> {
    cfg.validate(Task::GenSynthetic)?;
    let Source::Synthetic { preset, n_samples_per_cell, estimate, .. } = &cfg.source else {
        unreachable!("validated")
    };
    let syn = SyntheticConfig {
        preset: preset.clone(),
        n_samples_per_cell: *n_samples_per_cell,
        seed: mix_seed(cfg.seed, SEED_SYNTHETIC),
    };
    let (truth, data) = generate_synthetic(&syn)?;
    create_dir(&opts.out)?;
    write_file(&opts.out.join("stats_truth.json"), &truth.to_json())?;
    let mut w = csv::Writer::from_writer(create(&opts.out.join("synthetic.csv"))?);
    let data_err = |e: csv::Error| CliError::Data(e.to_string());
    let mut header = vec![BUCKET_FEATURE.to_string(), "treatment".into()];
    header.extend(data.outcome_names().iter().cloned());
    w.write_record(&header).map_err(data_err)?;
    for r in data.rows() {
        let mut rec = vec![r.features[0].to_string(), r.policy.to_string()];
        rec.extend(r.outcome.iter().map(|y| y.to_string()));
        w.write_record(&rec).map_err(data_err)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    if *estimate {
        write_file(&opts.out.join("stats_estimated.json"), &load_stats(cfg)?.train.to_json())?;
    }
    Ok(truth)
}
