//! Experiment configuration: the JSON file every subcommand reads.
//!
//! The schema is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use succmax_core::sampling::mix_seed;
use succmax_core::{InitStrategy, OptimizerConfig, SuccessRegion};
use succmax_data::{ColumnMapping, Normalization, Preset};

use crate::error::{CliError, Result};

/// Candidates drawn by the explore initialization in the preset defaults.
pub const EXPLORE_CANDIDATES: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub source: Source,
    #[serde(default)]
    pub grid: Option<Grid>,
    #[serde(default)]
    pub methods: Vec<Method>,
    /// Defaults to the per-preset hyperparameters, see [`default_optimizer`].
    #[serde(default)]
    pub optimizer: Option<OptimizerConfig<f64>>,
    /// Lets `greedy1d` rank 2-D cells by their value mean alone.
    #[serde(default)]
    pub value_projection: bool,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    Synthetic {
        preset: Preset,
        /// Rows per (bucket, policy) cell for `gen-synthetic` and `estimate`.
        #[serde(default = "default_samples")]
        n_samples_per_cell: usize,
        /// Optimize on bootstrap estimates from sampled rows instead of the
        /// exact preset parameters.
        #[serde(default)]
        estimate: bool,
        #[serde(default = "default_bootstrap")]
        n_bootstrap: usize,
    },
    StatsJson {
        path: PathBuf,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        columns: ColumnMapping,
        #[serde(default = "default_bucket_feature")]
        bucket_feature: String,
        #[serde(default = "default_buckets")]
        n_buckets: usize,
        #[serde(default = "default_bootstrap")]
        n_bootstrap: usize,
        #[serde(default = "default_normalization")]
        normalization: Normalization,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
}

fn default_samples() -> usize {
    10_000
}

fn default_bootstrap() -> usize {
    100
}

fn default_bucket_feature() -> String {
    "f0".into()
}

fn default_buckets() -> usize {
    8
}

fn default_normalization() -> Normalization {
    Normalization::ReferenceRelative
}

fn default_train_fraction() -> f64 {
    0.5
}

/// Either a list of `r` (1-D) or the product of `r_v` and `r_c` (2-D),
/// enumerated `r_v`-major.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_c: Option<Vec<f64>>,
}

impl Grid {
    pub fn one_d(r: Vec<f64>) -> Self {
        Self { r: Some(r), ..Self::default() }
    }

    pub fn two_d(r_v: Vec<f64>, r_c: Vec<f64>) -> Self {
        Self { r: None, r_v: Some(r_v), r_c: Some(r_c) }
    }

    pub fn dim(&self) -> usize {
        if self.r.is_some() {
            1
        } else {
            2
        }
    }

    pub fn points(&self) -> Result<Vec<SuccessRegion<f64>>> {
        let pts: Vec<SuccessRegion<f64>> = match (&self.r, &self.r_v, &self.r_c) {
            (Some(r), None, None) => r.iter().map(|&r| SuccessRegion::value_above(r)).collect(),
            (None, Some(rv), Some(rc)) => rv
                .iter()
                .flat_map(|&v| rc.iter().map(move |&c| SuccessRegion::value_above_cost_below(v, c)))
                .collect(),
            _ => return Err(CliError::Config("grid needs either `r` or both `r_v` and `r_c`".into())),
        };
        if pts.is_empty() {
            return Err(CliError::Config("grid is empty".into()));
        }
        if pts.iter().any(|p| p.thresholds().iter().any(|t| t.is_nan())) {
            return Err(CliError::Config("grid contains NaN".into()));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spm,
    Bruteforce,
    #[serde(rename = "greedy1d")]
    Greedy1d,
    Linprog,
    Mixedint,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Spm => "spm",
            Method::Bruteforce => "bruteforce",
            Method::Greedy1d => "greedy1d",
            Method::Linprog => "linprog",
            Method::Mixedint => "mixedint",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_true")]
    pub svg: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir(), svg: true }
    }
}

/// The subcommand a config is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Sweep,
    Optimize,
    Ingest,
    GenSynthetic,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        match &mut cfg.source {
            Source::StatsJson { path } | Source::Csv { path, .. } if path.is_relative() => {
                *path = base.join(&*path);
            }
            _ => {}
        }
        Ok(cfg)
    }

    pub fn validate(&self, task: Task) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        match &self.source {
            Source::Synthetic { n_samples_per_cell, estimate, n_bootstrap, .. } => {
                if (*estimate || task == Task::GenSynthetic) && *n_samples_per_cell < 2 {
                    return bad("n_samples_per_cell must be at least 2".into());
                }
                if *estimate && *n_bootstrap < 2 {
                    return bad(format!("n_bootstrap must be at least 2, got {n_bootstrap}"));
                }
            }
            Source::Csv { n_bootstrap, n_buckets, train_fraction, .. } => {
                if *n_bootstrap < 2 {
                    return bad(format!("n_bootstrap must be at least 2, got {n_bootstrap}"));
                }
                if *n_buckets == 0 {
                    return bad("n_buckets must be at least 1".into());
                }
                if !(*train_fraction > 0.0 && *train_fraction < 1.0) {
                    return bad(format!("train_fraction {train_fraction} outside (0, 1)"));
                }
            }
            Source::StatsJson { .. } => {}
        }
        match task {
            Task::Sweep | Task::Optimize => {
                let grid = self.grid.as_ref().ok_or_else(|| CliError::Config("missing grid".into()))?;
                let n = grid.points()?.len();
                if task == Task::Sweep && self.methods.is_empty() {
                    return bad("at least one method is required".into());
                }
                if task == Task::Optimize && n != 1 {
                    return bad(format!("optimize needs a single region point, the grid has {n}"));
                }
                if let Some(opt) = &self.optimizer {
                    opt.validate().map_err(|e| CliError::Config(e.to_string()))?;
                }
            }
            Task::Ingest => {
                if !matches!(self.source, Source::Csv { .. }) {
                    return bad("ingest needs a csv source".into());
                }
            }
            Task::GenSynthetic => {
                if !matches!(self.source, Source::Synthetic { .. }) {
                    return bad("gen-synthetic needs a synthetic source".into());
                }
            }
        }
        Ok(())
    }

    /// Optimizer settings for grid point `i`. Random seeds inside the
    /// optimizer block are replaced by values derived from the global seed
    /// and `i`, so `--seed` controls every run.
    pub fn optimizer_for_point(&self, outcome_dim: usize, i: usize) -> OptimizerConfig<f64> {
        let mut cfg = self
            .optimizer
            .clone()
            .unwrap_or_else(|| default_optimizer(&self.source, outcome_dim));
        let seed = mix_seed(mix_seed(self.seed, SEED_OPTIMIZER), i as u64);
        if let InitStrategy::Explore { seed: s, .. } = &mut cfg.init {
            *s = seed;
        }
        if let succmax_core::GradientBackend::Lemma1Mc { seed: s, .. } = &mut cfg.gradient_backend {
            *s = mix_seed(seed, 1);
        }
        cfg
    }
}

pub(crate) const SEED_SYNTHETIC: u64 = 1;
pub(crate) const SEED_BOOTSTRAP: u64 = 2;
pub(crate) const SEED_SPLIT: u64 = 3;
const SEED_OPTIMIZER: u64 = 4;

/// Hyperparameters per experiment: initialization, learning rate, steps.
///
/// | source | init | eta | steps |
/// |---|---|---|---|
/// | table1_large | uniform | 1e-1 | 1e4 |
/// | table1_small | explore | 1e-1 | 1e4 |
/// | table2_case_i / _ii | uniform | 1e-2 | 1e4 |
/// | bernoulli_alignment | explore | 1e-1 | 1e4 |
/// | other, 1-D | explore | 1e-2 | 1e5 |
/// | other, 2-D | explore | 1e-3 | 1e6 |
pub fn default_optimizer(source: &Source, outcome_dim: usize) -> OptimizerConfig<f64> {
    let explore = InitStrategy::Explore { n_random: EXPLORE_CANDIDATES, seed: 0 };
    let preset = match source {
        Source::Synthetic { preset, .. } => Some(preset),
        _ => None,
    };
    match (preset, outcome_dim) {
        (Some(Preset::Table1Large), _) => OptimizerConfig::new(InitStrategy::Uniform, 0.1, 10_000),
        (Some(Preset::Table1Small | Preset::BernoulliAlignment), _) => OptimizerConfig::new(explore, 0.1, 10_000),
        (Some(Preset::Table2CaseI | Preset::Table2CaseIi), _) => OptimizerConfig::new(InitStrategy::Uniform, 0.01, 10_000),
        (_, 1) => OptimizerConfig::new(explore, 0.01, 100_000),
        _ => OptimizerConfig::new(explore, 1e-3, 1_000_000),
    }
}
