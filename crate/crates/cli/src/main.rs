//! `mimo-align`: generate latent datasets, train equalizers, run sweeps and
//! count FLOPs.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when the
//! numerics fail (singular systems, divergence).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] mimo_align::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Linear,
    Neural,
}

#[derive(Parser)]
#[command(name = "mimo-align", version, about = "Joint MIMO precoding/decoding for latent space alignment")]
struct Cli {
    /// Base seed; overrides the one in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (0 = all cores, 1 = reference mode).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a seeded synthetic dataset.
    GenData {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a linear (ADMM) or neural equalizer pair.
    Train {
        #[arg(value_enum)]
        kind: ModelArg,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo sweep to CSV.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// FLOPs of a saved model or of an architecture description.
    Flops {
        #[arg(long, conflicts_with = "config")]
        model: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a saved model on a dataset over its stored channel.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    match cli.cmd {
        Cmd::GenData { spec, out } => commands::gen_data(spec.as_deref(), &out, cli.seed),
        Cmd::Train { kind, data, config, out } => commands::train(kind, &data, config.as_deref(), &out, cli.seed),
        Cmd::Sweep { data, config, out } => commands::sweep(&data, config.as_deref(), &out, cli.seed),
        Cmd::Flops { model, config, out } => commands::flops(model.as_deref(), config.as_deref(), out.as_deref()),
        Cmd::Eval { model, data, config, out } => commands::eval(&model, &data, config.as_deref(), out.as_deref(), cli.seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
