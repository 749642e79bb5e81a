//! Experiment harness: difficulty-level sweeps comparing the optimizer with
//! the baselines, single optimizer runs with traces, CSV ingestion and
//! synthetic data generation. The `succmax` binary is a thin wrapper over
//! [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;
pub mod sweep;

pub use commands::{cmd_gen_synthetic, cmd_ingest, cmd_optimize, cmd_sweep, load_stats, Format, RunOptions};
pub use config::{default_optimizer, ExperimentConfig, Grid, Method, Source, Task};
pub use error::{CliError, Result};
pub use sweep::{run_sweep, SweepRow, SweepSettings};
