use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, mean_errors, score_dataset, ErrorMatrix};
use super::plan::{select_replay, Selected, Source};
use super::train::{replay_train, train_baseline, CLConfig, SampleRef, Strategy, TrainReport};
use crate::data::{Dataset, SampleGroup};
use crate::transolver::{TransolverConfig, TransolverModel};
use crate::{Error, Result};

/// Settings of one sequential run over the groups of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceConfig {
    pub cl: CLConfig,
    pub model: TransolverConfig,
    pub model_seed: u64,
    /// The last `test_per_group` samples of every group are held out.
    pub test_per_group: usize,
    /// Epochs of the first stage; `None` uses `cl.epochs`.
    pub initial_epochs: Option<usize>,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            cl: CLConfig::default(),
            model: TransolverConfig::default(),
            model_seed: 0,
            test_per_group: 10,
            initial_epochs: None,
        }
    }
}

/// What happened in one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub group_id: u32,
    pub trained_samples: usize,
    pub wall_seconds: f64,
    pub train: TrainReport,
    /// `D_mix` of a replay stage.
    pub replay: Option<Vec<Selected>>,
}

pub struct SequenceResult {
    pub matrix: ErrorMatrix,
    pub stages: Vec<StageRecord>,
    pub model: TransolverModel,
}

/// `(train, test)` sample references of a group.
pub fn split_group(g: &SampleGroup, test_per_group: usize) -> Result<(Vec<SampleRef<'_>>, Vec<SampleRef<'_>>)> {
    let n = g.samples.len();
    if test_per_group >= n {
        return Err(Error::Config(format!(
            "group {} has {n} samples; holding out {test_per_group} leaves none for training",
            g.group_id
        )));
    }
    let refs: Vec<SampleRef> = g
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| SampleRef { group_id: g.group_id, sample_index: i, sample: s })
        .collect();
    let (train, test) = refs.split_at(n - test_per_group);
    Ok((train.to_vec(), test.to_vec()))
}

/// Mean errors of `model` on every test split, in group order.
pub fn evaluate_groups(
    model: &TransolverModel,
    tests: &[Vec<SampleRef>],
    cfg: &CLConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let digest = model.params().digest();
    let mut l2 = Vec::with_capacity(tests.len());
    let mut h1 = Vec::with_capacity(tests.len());
    for t in tests {
        let (a, b) = mean_errors(&evaluate(model, t, cfg.loss.boundary_mode)?);
        l2.push(a);
        h1.push(b);
    }
    if model.params().digest() != digest {
        return Err(Error::InvalidArgument("evaluation modified the model".into()));
    }
    Ok((l2, h1))
}

/// One replay stage: score, select `D_mix`, train with distillation.
pub fn replay_stage<'a>(
    model: &TransolverModel,
    past: &[SampleRef<'a>],
    new: &[SampleRef<'a>],
    cfg: &CLConfig,
    seed: u64,
) -> Result<(TransolverModel, TrainReport, Vec<Selected>)> {
    let mode = cfg.loss.boundary_mode;
    let sp = score_dataset(model, past, cfg.score_kind, mode, cfg.forcing)?;
    let sn = score_dataset(model, new, cfg.score_kind, mode, cfg.forcing)?;
    let selected = select_replay(&sp, &sn, &cfg.plan, seed)?;
    let mix: Vec<SampleRef> = selected
        .iter()
        .map(|s| {
            let pool = if s.source == Source::Past { past } else { new };
            *pool.iter().find(|r| r.key() == (s.group_id, s.sample_index)).expect("selected from pool")
        })
        .collect();
    let (m, report) = replay_train(model, &mix, cfg)?;
    Ok((m, report, selected))
}

/// Learns the groups of `dataset` in order with `strategy`, evaluating every
/// group's test split after each stage.
pub fn run_sequence(dataset: &Dataset, strategy: Strategy, cfg: &SequenceConfig) -> Result<SequenceResult> {
    cfg.cl.validate()?;
    if dataset.groups.len() < 2 {
        return Err(Error::InvalidArgument("a sequence needs at least two groups".into()));
    }
    if !dataset.is_labeled() {
        let g = dataset.groups.iter().find(|g| !g.is_labeled()).expect("unlabeled group");
        return Err(Error::MissingLabel { group_id: g.group_id, sample_index: 0 });
    }
    let mut trains = Vec::new();
    let mut tests = Vec::new();
    for g in &dataset.groups {
        let (a, b) = split_group(g, cfg.test_per_group)?;
        trains.push(a);
        tests.push(b);
    }

    let mut model = TransolverModel::new(cfg.model, cfg.model_seed)?;
    let mut matrix = ErrorMatrix::new(dataset.groups.iter().map(|g| g.group_id).collect());
    let mut stages = Vec::new();
    for (m, group) in dataset.groups.iter().enumerate() {
        let start = Instant::now();
        let stage_cfg = CLConfig {
            epochs: if m == 0 { cfg.initial_epochs.unwrap_or(cfg.cl.epochs) } else { cfg.cl.epochs },
            seed: crate::rng::derive_seed(cfg.cl.seed, 0x57a9e, m as u64),
            ..cfg.cl.clone()
        };
        let (next, report, replay, trained) = match (strategy, m) {
            (_, 0) | (Strategy::Naive, _) => {
                let (n, r) = train_baseline(&model, &trains[m], &stage_cfg)?;
                (n, r, None, trains[m].len())
            }
            (Strategy::Joint, _) => {
                let all: Vec<SampleRef> = trains[..=m].iter().flatten().copied().collect();
                let (n, r) = train_baseline(&model, &all, &stage_cfg)?;
                (n, r, None, all.len())
            }
            (Strategy::Replay, _) => {
                let past: Vec<SampleRef> = trains[..m].iter().flatten().copied().collect();
                let (n, r, sel) = replay_stage(&model, &past, &trains[m], &stage_cfg, stage_cfg.seed)?;
                let count = sel.len();
                (n, r, Some(sel), count)
            }
        };
        model = next;
        let wall_seconds = start.elapsed().as_secs_f64();
        let (l2, h1) = evaluate_groups(&model, &tests, &cfg.cl)?;
        log::info!(
            "{} stage {} (group {}): {} samples, {:.1}s, ID rel_L2 {:.4}",
            strategy.as_str(),
            m + 1,
            group.group_id,
            trained,
            wall_seconds,
            l2[..=m].iter().sum::<f64>() / (m + 1) as f64
        );
        matrix.push_stage(l2, h1)?;
        stages.push(StageRecord {
            stage: m + 1,
            group_id: group.group_id,
            trained_samples: trained,
            wall_seconds,
            train: report,
            replay,
        });
    }
    Ok(SequenceResult { matrix, stages, model })
}
