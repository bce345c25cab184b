//! Score a pool with the label-free PDE residual, then fine-tune on the
//! worst decile with oracle labels while distilling on the rest.

use pncl::continual::{
    evaluate, mean_errors, rank_worst, score_dataset, sft_train, split_group, train_baseline, CLConfig, SampleRef,
};
use pncl::data::{default_schedule, generate_groups, DEFAULT_LENGTH_SCALE};
use pncl::oracle::{label_dataset, DEFAULT_TOLERANCE};
use pncl::physics::{BoundaryMode, ScoreKind};
use pncl::transolver::{TransolverConfig, TransolverModel};

fn main() -> anyhow::Result<()> {
    let mode = BoundaryMode::HardMask;
    let s = default_schedule();
    let mut data = generate_groups(&[s[0], s[1]], 20, 20, DEFAULT_LENGTH_SCALE, 7)?;
    label_dataset(&mut data, 1.0, DEFAULT_TOLERANCE)?;
    let (first, _) = split_group(&data.groups[0], 0)?;
    let model = TransolverModel::new(TransolverConfig::new(2, 8, 24, 4)?, 1)?;
    let (model, _) = train_baseline(&model, &first, &CLConfig { epochs: 60, ..CLConfig::default() })?;

    let pool: Vec<SampleRef> = data.groups.iter().flat_map(|g| split_group(g, 0).unwrap().0).collect();
    let scores = score_dataset(&model, &pool, ScoreKind::Energy, mode, 1.0)?;
    let worst: Vec<_> = rank_worst(&scores)[..pool.len() / 10].iter().map(|s| (s.group_id, s.sample_index)).collect();
    let (d_sft, d_left): (Vec<SampleRef>, Vec<SampleRef>) = pool.iter().partition(|r| worst.contains(&r.key()));
    println!("worst by score: {worst:?}");

    let err =
        |m: &TransolverModel, set: &[SampleRef]| -> anyhow::Result<f64> { Ok(mean_errors(&evaluate(m, set, mode)?).0) };
    let (tuned, _) = sft_train(&model, &d_sft, &d_left, &CLConfig { epochs: 30, ..CLConfig::default() })?;
    println!("worst decile rel_L2 {:.3} -> {:.3}", err(&model, &d_sft)?, err(&tuned, &d_sft)?);
    println!("remainder    rel_L2 {:.3} -> {:.3}", err(&model, &d_left)?, err(&tuned, &d_left)?);
    Ok(())
}
