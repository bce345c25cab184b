//! The `pncl` command pipeline driven from code: generate, label, train,
//! evaluate, run a short replay sequence and summarize.

use pncl::data::default_schedule;
use pncl::experiment::{run, Command, ExperimentConfig, RunOptions};

fn main() -> anyhow::Result<()> {
    let dir = tempfile_dir()?;
    let mut cfg = ExperimentConfig { out: dir.clone(), ..ExperimentConfig::default() };
    cfg.dataset.schedule = default_schedule()[..2].to_vec();
    cfg.dataset.samples_per_group = 8;
    cfg.dataset.nx = 16;
    cfg.model.channels = 16;
    cfg.strategy.test_per_group = 2;
    cfg.strategy.initial_epochs = 10;
    cfg.strategy.epochs = 5;

    let opts = RunOptions::default();
    for cmd in
        [Command::GenData, Command::SolveLabels, Command::Train, Command::Eval, Command::Continual, Command::Report]
    {
        let outputs = run(cmd, &cfg, &opts)?;
        println!(
            "{:<13} {}",
            cmd.name(),
            outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>().join(" ")
        );
    }
    println!("{}", std::fs::read_to_string(dir.join("report.json"))?);
    std::fs::remove_dir_all(dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("pncl-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
