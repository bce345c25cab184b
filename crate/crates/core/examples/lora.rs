//! Low-rank adapters: attach, count, train a replay stage through them, merge.

use pncl::continual::{replay_stage, split_group, CLConfig};
use pncl::data::{default_schedule, generate_groups, GridField, DEFAULT_LENGTH_SCALE};
use pncl::oracle::{label_dataset, DEFAULT_TOLERANCE};
use pncl::transolver::{LoraConfig, TransolverConfig, TransolverModel};

fn main() -> anyhow::Result<()> {
    let base = TransolverModel::new(TransolverConfig::new(2, 8, 32, 4)?, 1)?;
    let mut adapted = base.clone();
    adapted.attach_lora(&LoraConfig { rank: 4, ..LoraConfig::default() }, 2)?;
    println!(
        "base {} parameters; with rank-4 adapters {} trainable of {}",
        base.params().total_count(),
        adapted.params().trainable_count(),
        adapted.params().total_count()
    );
    // B starts at zero, so the adapted model is the base model.
    let k = GridField::constant(16, 16, 1.0)?;
    assert_eq!(adapted.predict(&k)?, base.predict(&k)?);

    let s = default_schedule();
    let mut data = generate_groups(&[s[0], s[6]], 12, 16, DEFAULT_LENGTH_SCALE, 5)?;
    label_dataset(&mut data, 1.0, DEFAULT_TOLERANCE)?;
    let (past, _) = split_group(&data.groups[0], 2)?;
    let (new, _) = split_group(&data.groups[1], 2)?;
    let cfg =
        CLConfig { epochs: 5, lora: Some(LoraConfig { rank: 4, ..LoraConfig::default() }), ..CLConfig::default() };
    let (merged, report, _) = replay_stage(&base, &past, &new, &cfg, 0)?;
    println!(
        "replay through adapters: loss {:.4e} -> {:.4e}; merged model has {} parameters",
        report.epoch_loss[0],
        report.epoch_loss.last().unwrap(),
        merged.params().total_count()
    );
    Ok(())
}
