use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{layer_param, TransolverModel, LAYER_LINEAR, LAYER_PLAIN};
use crate::diffcore::Tensor;
use crate::rng::rng_from;
use crate::{Error, Result};

pub const LORA_INIT_STD: f64 = 0.02;

/// Low-rank update `W + α·A·B` on one base matrix `W: d×m`.
/// `A: d×r` and `B: r×m` are stored in the model under `<target>.lora_a/b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoraAdapter {
    pub target: String,
    pub rank: usize,
    pub alpha: f64,
}

impl LoraAdapter {
    pub fn a_name(&self) -> String {
        format!("{}.lora_a", self.target)
    }

    pub fn b_name(&self) -> String {
        format!("{}.lora_b", self.target)
    }

    /// `r·(d + m)`.
    pub fn parameter_count(&self, d: usize, m: usize) -> usize {
        self.rank * (d + m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoraInit {
    /// `A ~ N(0, 0.02²)`, `B = 0`: the adapted model starts equal to the base.
    ZeroB,
    /// Both factors `~ N(0, 0.02²)`.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
    /// Base matrix names; empty means [`default_targets`].
    pub targets: Vec<String>,
    pub init: LoraInit,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self { rank: 8, alpha: 16.0, targets: Vec::new(), init: LoraInit::ZeroB }
    }
}

/// Q/K/V, output, slice (`u`, `m`) and feed-forward matrices of every layer.
pub fn default_targets(layers: usize) -> Vec<String> {
    let mut t = Vec::new();
    for l in 0..layers {
        for name in LAYER_PLAIN.iter().chain(LAYER_LINEAR.iter()) {
            t.push(format!("{}.w", layer_param(l, name)));
        }
    }
    t
}

impl TransolverModel {
    /// Freezes every base parameter and adds trainable `A`, `B` factors to each target.
    pub fn attach_lora(&mut self, cfg: &LoraConfig, seed: u64) -> Result<()> {
        if cfg.rank == 0 {
            return Err(Error::InvalidArgument("LoRA rank must be at least 1".into()));
        }
        if !cfg.alpha.is_finite() {
            return Err(Error::InvalidArgument("LoRA alpha must be finite".into()));
        }
        let targets = if cfg.targets.is_empty() { default_targets(self.config.layers) } else { cfg.targets.clone() };
        let mut shapes = Vec::with_capacity(targets.len());
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) || self.adapters.iter().any(|a| &a.target == t) {
                return Err(Error::InvalidArgument(format!("`{t}` is already adapted")));
            }
            let w = self
                .params
                .get(t)
                .filter(|_| t.ends_with(".w"))
                .ok_or_else(|| Error::InvalidArgument(format!("`{t}` is not a weight matrix of this model")))?;
            let (d, m) = (w.rows(), w.cols());
            if cfg.rank > d.min(m) {
                return Err(Error::InvalidArgument(format!("rank {} exceeds min({d}, {m}) for `{t}`", cfg.rank)));
            }
            shapes.push((d, m));
        }

        self.params.freeze_all();
        let mut rng = rng_from(seed);
        let normal = Normal::new(0.0, LORA_INIT_STD).expect("valid std");
        let mut draw = |n: usize| (0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<_>>();
        for (t, (d, m)) in targets.into_iter().zip(shapes) {
            let adapter = LoraAdapter { target: t, rank: cfg.rank, alpha: cfg.alpha };
            let a = Tensor::matrix(d, cfg.rank, draw(d * cfg.rank))?;
            let b = match cfg.init {
                LoraInit::ZeroB => Tensor::zeros(&[cfg.rank, m]),
                LoraInit::Gaussian => Tensor::matrix(cfg.rank, m, draw(cfg.rank * m))?,
            };
            self.params.insert(adapter.a_name(), a)?;
            self.params.insert(adapter.b_name(), b)?;
            self.adapters.push(adapter);
        }
        Ok(())
    }

    /// Folds every adapter into its base matrix (`W ← W + α·A·B`), then
    /// detaches. All parameters become trainable again.
    pub fn merge_lora(&mut self) -> Result<()> {
        for a in std::mem::take(&mut self.adapters) {
            let fa = self.params.remove(&a.a_name()).expect("adapter factor");
            let fb = self.params.remove(&a.b_name()).expect("adapter factor");
            let i = self.params.index_of(&a.target).expect("adapter target");
            let w = self.params.tensor_mut(i);
            let (d, m, r) = (w.rows(), w.cols(), a.rank);
            let data = w.data_mut();
            for row in 0..d {
                for col in 0..m {
                    let ab: f64 = (0..r).map(|k| fa.get(row, k) * fb.get(k, col)).sum();
                    data[row * m + col] += a.alpha * ab;
                }
            }
        }
        self.unfreeze();
        Ok(())
    }

    /// Drops all adapters without touching the base weights.
    pub fn detach_lora(&mut self) {
        for a in std::mem::take(&mut self.adapters) {
            self.params.remove(&a.a_name());
            self.params.remove(&a.b_name());
        }
        self.unfreeze();
    }

    fn unfreeze(&mut self) {
        for i in 0..self.params.len() {
            self.params.set_trainable(i, true);
        }
    }
}
