//! Label-free training with the energy loss, checked against the oracle.

use pncl::continual::{evaluate, mean_errors, split_group, train_baseline, CLConfig};
use pncl::data::{default_schedule, generate_groups, DEFAULT_LENGTH_SCALE};
use pncl::oracle::{label_dataset, DEFAULT_TOLERANCE};
use pncl::physics::BoundaryMode;
use pncl::transolver::{TransolverConfig, TransolverModel};

fn main() -> anyhow::Result<()> {
    let mut data = generate_groups(&default_schedule()[..1], 30, 24, DEFAULT_LENGTH_SCALE, 7)?;
    // Labels are only used for evaluation.
    label_dataset(&mut data, 1.0, DEFAULT_TOLERANCE)?;
    let (train, test) = split_group(&data.groups[0], 6)?;

    let model = TransolverModel::new(TransolverConfig::new(2, 8, 32, 4)?, 1)?;
    println!("{} parameters", model.config().parameter_count());
    let before = mean_errors(&evaluate(&model, &test, BoundaryMode::HardMask)?).0;
    let cfg = CLConfig { epochs: 40, ..CLConfig::default() };
    let (model, report) = train_baseline(&model, &train, &cfg)?;
    let after = mean_errors(&evaluate(&model, &test, BoundaryMode::HardMask)?).0;

    for (e, l) in report.epoch_loss.iter().enumerate().step_by(10) {
        println!("epoch {e:>3}: energy {l:+.5e}");
    }
    println!("held-out rel_L2 {before:.3} -> {after:.3} in {:.1}s", report.wall_seconds);
    Ok(())
}
