//! The sequential ID/OOD protocol on three groups, for all three strategies.

use pncl::continual::{run_sequence, CLConfig, SequenceConfig, Strategy};
use pncl::data::{default_schedule, generate_groups, DEFAULT_LENGTH_SCALE};
use pncl::oracle::{label_dataset, DEFAULT_TOLERANCE};
use pncl::transolver::TransolverConfig;

fn main() -> anyhow::Result<()> {
    let s = default_schedule();
    let mut data = generate_groups(&[s[0], s[4], s[9]], 16, 16, DEFAULT_LENGTH_SCALE, 11)?;
    label_dataset(&mut data, 1.0, DEFAULT_TOLERANCE)?;
    let cfg = SequenceConfig {
        cl: CLConfig { epochs: 10, ..CLConfig::default() },
        model: TransolverConfig::new(1, 8, 16, 2)?,
        model_seed: 1,
        test_per_group: 4,
        initial_epochs: Some(30),
    };
    for strategy in [Strategy::Joint, Strategy::Naive, Strategy::Replay] {
        let result = run_sequence(&data, strategy, &cfg)?;
        let secs: f64 = result.stages.iter().map(|s| s.wall_seconds).sum();
        println!("{} ({secs:.1}s, {} OOD cells)", strategy.as_str(), result.matrix.ood_count());
        print!("{}", result.matrix.to_csv());
    }
    Ok(())
}
