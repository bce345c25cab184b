use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pncl::experiment::{run, Command, ExperimentConfig, RunOptions};

/// Physics-informed Transolver training and continual learning on Darcy flow.
#[derive(Parser)]
#[command(name = "pncl", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Size of the worker thread pool.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Allow replacing existing artifacts.
    #[arg(long, global = true)]
    overwrite: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the permeability groups.
    GenData,
    /// Label every sample with the reference solver.
    SolveLabels,
    /// Train a model from scratch on the configured groups.
    Train,
    /// Run the sequential ID/OOD protocol for `strategy.kind`.
    Continual,
    /// Fine-tune on the worst-scored samples of a pool.
    Sft {
        /// Checkpoint to fine-tune (default `<out>/model.pncl`).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Per-group test errors and PDE scores of a checkpoint.
    Eval {
        /// Checkpoint to evaluate (default `<out>/model.pncl`).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Summarize the error matrices in the output directory.
    Report,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PNCL_LOG", "info")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    let mut opts = RunOptions { overwrite: cli.overwrite, model: None };
    let cmd = match cli.command {
        Cmd::GenData => Command::GenData,
        Cmd::SolveLabels => Command::SolveLabels,
        Cmd::Train => Command::Train,
        Cmd::Continual => Command::Continual,
        Cmd::Sft { model } => {
            opts.model = model;
            Command::Sft
        }
        Cmd::Eval { model } => {
            opts.model = model;
            Command::Eval
        }
        Cmd::Report => Command::Report,
    };
    let outputs = run(cmd, &cfg, &opts)?;
    for p in outputs {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}
