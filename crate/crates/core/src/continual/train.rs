use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::ReplayPlan;
use crate::data::{GridField, GridSample};
use crate::diffcore::{adam_step, AdamState, Tensor};
use crate::physics::{
    apply_dirichlet, masked_prediction, mse_to_target, sample_loss, BoundaryMode, LossConfig, ScoreKind,
};
use crate::rng::{derive_seed, rng_from};
use crate::transolver::{LoraConfig, TransolverModel};
use crate::{Error, Result};

const SHUFFLE_STREAM: u64 = 0x5_4u64;
const LORA_STREAM: u64 = 0x10_2a;

/// Plain training strategies and replay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Retrain on every group seen so far (warm-started from the previous stage).
    Joint,
    /// Fine-tune on the newest group only.
    Naive,
    /// Score, select `D_mix` and train with distillation.
    Replay,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Joint => "joint",
            Strategy::Naive => "naive",
            Strategy::Replay => "replay",
        }
    }
}

/// Training and continual-learning settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CLConfig {
    /// Weight `λ` of the distillation term.
    pub lambda_distill: f64,
    pub loss: LossConfig,
    /// Adapters for replay and SFT; `None` trains all parameters.
    pub lora: Option<LoraConfig>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Constant source term `q`.
    pub forcing: f64,
    pub score_kind: ScoreKind,
    pub plan: ReplayPlan,
}

impl Default for CLConfig {
    fn default() -> Self {
        Self {
            lambda_distill: 0.3,
            loss: LossConfig::default(),
            lora: None,
            epochs: 50,
            lr: 1e-3,
            batch_size: 4,
            seed: 0,
            forcing: 1.0,
            score_kind: ScoreKind::Energy,
            plan: ReplayPlan::default(),
        }
    }
}

impl CLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_distill >= 0.0) {
            return Err(Error::Config(format!("lambda_distill must be >= 0, got {}", self.lambda_distill)));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !self.forcing.is_finite() {
            return Err(Error::Config("forcing must be finite".into()));
        }
        self.loss.validate()?;
        self.plan.validate()
    }
}

/// A sample together with its dataset coordinates.
#[derive(Clone, Copy, Debug)]
pub struct SampleRef<'a> {
    pub group_id: u32,
    pub sample_index: usize,
    pub sample: &'a GridSample,
}

impl SampleRef<'_> {
    pub fn key(&self) -> (u32, usize) {
        (self.group_id, self.sample_index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub steps: usize,
    /// Mean per-step loss of each epoch.
    pub epoch_loss: Vec<f64>,
    pub wall_seconds: f64,
    /// Teacher parameter digest, checked unchanged after training.
    pub teacher_digest: Option<String>,
    /// Distillation MSE of the untrained student against the teacher.
    pub initial_distill: Option<f64>,
}

/// One contribution to a step's loss.
struct Term<'a> {
    k: &'a GridField,
    label: Option<&'a GridField>,
    current: Option<(LossConfig, f64)>,
    distill: Option<(&'a [f64], f64)>,
}

fn forcing_field(k: &GridField, forcing: f64) -> Result<GridField> {
    GridField::constant(k.nx(), k.ny(), forcing)
}

fn term_grad(model: &TransolverModel, term: &Term, mode: BoundaryMode, forcing: f64) -> Result<(f64, Vec<Tensor>)> {
    let q = forcing_field(term.k, forcing)?;
    let (nx, ny) = (term.k.nx(), term.k.ny());
    model.loss_and_grad(term.k, |g, out| {
        let mut total = None;
        if let Some((cfg, w)) = &term.current {
            let l = sample_loss(g, cfg, term.k, &q, out, term.label)?;
            total = Some(g.scale(l, *w));
        }
        if let Some((target, w)) = term.distill {
            let pred = masked_prediction(g, out, nx, ny, mode)?;
            let d = mse_to_target(g, pred, target)?;
            let d = g.scale(d, w);
            total = Some(match total {
                Some(t) => g.add(t, d)?,
                None => d,
            });
        }
        total.ok_or_else(|| Error::InvalidArgument("empty loss term".into()))
    })
}

struct Trainer<'m> {
    model: &'m mut TransolverModel,
    adam: AdamState,
    cfg: &'m CLConfig,
    steps: usize,
}

impl<'m> Trainer<'m> {
    fn new(model: &'m mut TransolverModel, cfg: &'m CLConfig) -> Self {
        let adam = AdamState::new(model.params());
        Self { model, adam, cfg, steps: 0 }
    }

    fn step(&mut self, terms: &[Term], epoch: usize) -> Result<f64> {
        let mode = self.cfg.loss.boundary_mode;
        let model = &*self.model;
        let parts: Vec<(f64, Vec<Tensor>)> =
            terms.par_iter().map(|t| term_grad(model, t, mode, self.cfg.forcing)).collect::<Result<_>>()?;
        let mut loss = 0.0;
        let mut total: Vec<Tensor> = model.params().iter().map(|(_, t, _)| Tensor::zeros(t.shape())).collect();
        for (l, grads) in parts {
            loss += l;
            for (acc, g) in total.iter_mut().zip(&grads) {
                acc.add_assign(g);
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite { context: format!("training loss at epoch {epoch}, step {}", self.steps) });
        }
        adam_step(self.model.params_mut(), &total, &mut self.adam, self.cfg.lr)?;
        self.steps += 1;
        Ok(loss)
    }
}

fn shuffled(n: usize, seed: u64, stream: u64, epoch: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from(derive_seed(seed, stream, epoch as u64)));
    idx
}

/// Boundary-enforced predictions, one value vector per sample.
pub fn predictions(model: &TransolverModel, samples: &[SampleRef], mode: BoundaryMode) -> Result<Vec<Vec<f64>>> {
    samples.par_iter().map(|s| Ok(apply_dirichlet(&model.predict(&s.sample.k)?, mode).into_values())).collect()
}

/// Mean over samples of the MSE between `model`'s predictions and `targets`.
pub fn distill_mse(
    model: &TransolverModel,
    samples: &[SampleRef],
    targets: &[Vec<f64>],
    mode: BoundaryMode,
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let preds = predictions(model, samples, mode)?;
    let per: Vec<f64> = preds
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64)
        .collect();
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

fn check_labels(samples: &[SampleRef], needed: bool) -> Result<()> {
    if needed {
        if let Some(s) = samples.iter().find(|s| s.sample.label.is_none()) {
            return Err(Error::MissingLabel { group_id: s.group_id, sample_index: s.sample_index });
        }
    }
    Ok(())
}

/// Epoch loop over `samples` with optional distillation towards `teacher`.
fn fit(
    model: &mut TransolverModel,
    samples: &[SampleRef],
    teacher: Option<&[Vec<f64>]>,
    cfg: &CLConfig,
    report: &mut TrainReport,
) -> Result<()> {
    let b = cfg.batch_size;
    let mut tr = Trainer::new(model, cfg);
    for epoch in 0..cfg.epochs {
        let order = shuffled(samples.len(), cfg.seed, SHUFFLE_STREAM, epoch);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(b) {
            let w = 1.0 / chunk.len() as f64;
            let terms: Vec<Term> = chunk
                .iter()
                .map(|&i| Term {
                    k: &samples[i].sample.k,
                    label: samples[i].sample.label.as_ref(),
                    current: Some((cfg.loss, w)),
                    distill: teacher.map(|t| (t[i].as_slice(), cfg.lambda_distill * w)),
                })
                .collect();
            sum += tr.step(&terms, epoch)?;
            batches += 1;
        }
        let mean = sum / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        report.epoch_loss.push(mean);
    }
    report.epochs = cfg.epochs;
    report.steps = tr.steps;
    Ok(())
}

/// Plain training of all parameters on `samples` (joint or naive fine-tuning;
/// the strategy only determines which samples the caller passes).
pub fn train_baseline(
    model: &TransolverModel,
    samples: &[SampleRef],
    cfg: &CLConfig,
) -> Result<(TransolverModel, TrainReport)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    check_labels(samples, cfg.loss.needs_labels())?;
    let start = Instant::now();
    let mut student = model.clone();
    let mut report = TrainReport::default();
    fit(&mut student, samples, None, cfg, &mut report)?;
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((student, report))
}

fn make_student(teacher: &TransolverModel, lora: Option<&LoraConfig>, seed: u64) -> Result<TransolverModel> {
    let mut s = teacher.clone();
    if let Some(l) = lora {
        s.attach_lora(l, derive_seed(seed, LORA_STREAM, 0))?;
    }
    Ok(s)
}

fn finish_student(mut student: TransolverModel, teacher: &TransolverModel, digest: &str) -> Result<TransolverModel> {
    if teacher.params().digest() != digest {
        return Err(Error::InvalidArgument("teacher parameters changed during training".into()));
    }
    if !student.adapters().is_empty() {
        student.merge_lora()?;
    }
    Ok(student)
}

/// Replay training on `D_mix`: `L_current + λ·MSE(student, teacher)` per
/// sample, where the teacher is the frozen incoming model.
pub fn replay_train(
    model: &TransolverModel,
    mix: &[SampleRef],
    cfg: &CLConfig,
) -> Result<(TransolverModel, TrainReport)> {
    cfg.validate()?;
    if mix.is_empty() {
        return Err(Error::InvalidArgument("replay set is empty".into()));
    }
    check_labels(mix, cfg.loss.needs_labels())?;
    let start = Instant::now();
    let digest = model.params().digest();
    let mode = cfg.loss.boundary_mode;
    let targets = predictions(model, mix, mode)?;
    let mut student = make_student(model, cfg.lora.as_ref(), cfg.seed)?;
    let mut report =
        TrainReport { initial_distill: Some(distill_mse(&student, mix, &targets, mode)?), ..TrainReport::default() };
    fit(&mut student, mix, Some(&targets), cfg, &mut report)?;
    let student = finish_student(student, model, &digest)?;
    report.teacher_digest = Some(digest);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((student, report))
}

/// Supervised fine-tuning on labeled `D_sft` with distillation on `D_left`.
///
/// Each step takes a batch of `D_sft` (data MSE on the boundary-enforced
/// prediction) and an equally sized batch cycled from `D_left`
/// (`λ`-weighted distillation MSE).
pub fn sft_train(
    model: &TransolverModel,
    d_sft: &[SampleRef],
    d_left: &[SampleRef],
    cfg: &CLConfig,
) -> Result<(TransolverModel, TrainReport)> {
    cfg.validate()?;
    if d_sft.is_empty() {
        return Err(Error::InvalidArgument("SFT set is empty".into()));
    }
    check_labels(d_sft, true)?;
    if let Some(s) = d_sft.iter().find(|s| d_left.iter().any(|l| l.key() == s.key())) {
        return Err(Error::InvalidArgument(format!(
            "sample ({}, {}) is in both the SFT and the distillation set",
            s.group_id, s.sample_index
        )));
    }
    let start = Instant::now();
    let digest = model.params().digest();
    let mode = cfg.loss.boundary_mode;
    let targets = predictions(model, d_left, mode)?;
    let mut student = make_student(model, cfg.lora.as_ref(), cfg.seed)?;
    let mut report =
        TrainReport { initial_distill: Some(distill_mse(&student, d_left, &targets, mode)?), ..TrainReport::default() };
    let data_cfg = LossConfig { boundary_mode: mode, ..LossConfig::data() };

    let mut tr = Trainer::new(&mut student, cfg);
    let mut left_order = Vec::new();
    let mut left_pos = 0;
    let mut refills = 0;
    for epoch in 0..cfg.epochs {
        let order = shuffled(d_sft.len(), cfg.seed, SHUFFLE_STREAM, epoch);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let w = 1.0 / chunk.len() as f64;
            let mut terms: Vec<Term> = chunk
                .iter()
                .map(|&i| Term {
                    k: &d_sft[i].sample.k,
                    label: d_sft[i].sample.label.as_ref(),
                    current: Some((data_cfg, w)),
                    distill: None,
                })
                .collect();
            if !d_left.is_empty() {
                for _ in 0..chunk.len() {
                    if left_pos == left_order.len() {
                        left_order = shuffled(d_left.len(), cfg.seed, SHUFFLE_STREAM + 1, refills);
                        refills += 1;
                        left_pos = 0;
                    }
                    let j = left_order[left_pos];
                    left_pos += 1;
                    terms.push(Term {
                        k: &d_left[j].sample.k,
                        label: None,
                        current: None,
                        distill: Some((targets[j].as_slice(), cfg.lambda_distill * w)),
                    });
                }
            }
            sum += tr.step(&terms, epoch)?;
            batches += 1;
        }
        report.epoch_loss.push(sum / batches as f64);
    }
    report.epochs = cfg.epochs;
    report.steps = tr.steps;
    let student = finish_student(student, model, &digest)?;
    report.teacher_digest = Some(digest);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((student, report))
}
