use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use succmax_cli::{cmd_gen_synthetic, cmd_ingest, cmd_optimize, cmd_sweep, CliError, ExperimentConfig, Format, RunOptions};

#[derive(Parser)]
#[command(name = "succmax", version, about = "Success-probability maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Write 0 in the wall-time column so reruns are byte-identical.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Every method at every grid point.
    Sweep,
    /// One optimizer run at a single region point, with its trace.
    Optimize,
    /// CSV to train/test stats JSON.
    Ingest,
    /// Sample rows from a synthetic preset.
    GenSynthetic,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let opts = RunOptions {
        out: cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone()),
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        deterministic: cli.deterministic,
    };
    match cli.command {
        Command::Sweep => {
            let rows = cmd_sweep(&cfg, &opts)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!("{} rows written to {} ({failed} failed)", rows.len(), opts.out.display());
        }
        Command::Optimize => {
            let r = cmd_optimize(&cfg, &opts)?;
            eprintln!("criterion {} (stalled: {})", r.criterion_final, r.stalled);
        }
        Command::Ingest => {
            cmd_ingest(&cfg, &opts)?;
        }
        Command::GenSynthetic => {
            cmd_gen_synthetic(&cfg, &opts)?;
        }
    }
    Ok(())
}
