//! One continual-learning stage: a model trained on a mild group meets a far
//! one. Naive fine-tuning forgets; replay with distillation does not.

use pncl::continual::{evaluate, mean_errors, replay_stage, split_group, train_baseline, CLConfig, Pick, Source};
use pncl::data::{default_schedule, generate_groups, DEFAULT_LENGTH_SCALE};
use pncl::oracle::{label_dataset, DEFAULT_TOLERANCE};
use pncl::physics::BoundaryMode;
use pncl::transolver::{TransolverConfig, TransolverModel};

fn main() -> anyhow::Result<()> {
    let s = default_schedule();
    let mut data = generate_groups(&[s[0], s[9]], 24, 20, DEFAULT_LENGTH_SCALE, 7)?;
    label_dataset(&mut data, 1.0, DEFAULT_TOLERANCE)?;
    let (past, past_test) = split_group(&data.groups[0], 4)?;
    let (new, new_test) = split_group(&data.groups[1], 4)?;
    let err = |m: &TransolverModel| -> anyhow::Result<(f64, f64)> {
        let mode = BoundaryMode::HardMask;
        Ok((mean_errors(&evaluate(m, &past_test, mode)?).0, mean_errors(&evaluate(m, &new_test, mode)?).0))
    };

    let model = TransolverModel::new(TransolverConfig::new(2, 8, 24, 4)?, 1)?;
    let (stage1, _) = train_baseline(&model, &past, &CLConfig { epochs: 60, ..CLConfig::default() })?;
    println!("stage 1        past {:.3}  new {:.3}", err(&stage1)?.0, err(&stage1)?.1);

    let cfg = CLConfig { epochs: 20, ..CLConfig::default() };
    let (naive, _) = train_baseline(&stage1, &new, &cfg)?;
    let (replay, report, selected) = replay_stage(&stage1, &past, &new, &cfg, 3)?;
    let (n, r) = (err(&naive)?, err(&replay)?);
    println!("naive          past {:.3}  new {:.3}", n.0, n.1);
    println!("replay         past {:.3}  new {:.3}", r.0, r.1);

    let count = |src, pick| selected.iter().filter(|s| s.source == src && s.pick == pick).count();
    println!(
        "replay mix: past {} worst + {} random, new {} worst + {} random; distillation at start {:.2e}",
        count(Source::Past, Pick::Worst),
        count(Source::Past, Pick::Random),
        count(Source::New, Pick::Worst),
        count(Source::New, Pick::Random),
        report.initial_distill.unwrap_or(0.0)
    );
    Ok(())
}
