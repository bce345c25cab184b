use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continual::{CLConfig, ReplayPlan, SequenceConfig, Strategy};
use crate::data::{default_schedule, GroupSpec, DEFAULT_LENGTH_SCALE};
use crate::physics::{LossConfig, ScoreKind};
use crate::rng::derive_seed;
use crate::transolver::{LoraConfig, TransolverConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub schedule: Vec<GroupSpec>,
    pub samples_per_group: usize,
    pub nx: usize,
    pub length_scale: f64,
    pub forcing: f64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            samples_per_group: 50,
            nx: 32,
            length_scale: DEFAULT_LENGTH_SCALE,
            forcing: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub layers: usize,
    pub slices: usize,
    pub channels: usize,
    pub heads: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let c = TransolverConfig::default();
        Self { layers: c.layers, slices: c.slices, channels: c.channels, heads: c.heads }
    }
}

impl ModelSection {
    pub fn transolver(&self) -> Result<TransolverConfig> {
        TransolverConfig::new(self.layers, self.slices, self.channels, self.heads)
    }
}

/// Training strategy for `continual` (`joint`, `naive`, `replay`) or `sft`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Joint,
    Naive,
    Replay,
    Sft,
}

impl StrategyKind {
    pub fn sequence_strategy(self) -> Option<Strategy> {
        match self {
            StrategyKind::Joint => Some(Strategy::Joint),
            StrategyKind::Naive => Some(Strategy::Naive),
            StrategyKind::Replay => Some(Strategy::Replay),
            StrategyKind::Sft => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategySection {
    pub kind: StrategyKind,
    pub epochs: usize,
    /// First-stage epochs of a sequence and epochs of `train`.
    pub initial_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lambda_distill: f64,
    pub score_kind: ScoreKind,
    pub plan: ReplayPlan,
    pub lora: Option<LoraConfig>,
    /// Held-out samples at the end of every group.
    pub test_per_group: usize,
    /// Group ids used by `train`; empty means the first group.
    pub train_groups: Vec<u32>,
    /// Group ids pooled by `sft`; empty means every group.
    pub sft_groups: Vec<u32>,
    /// Share of the pool (worst by score) fine-tuned with labels.
    pub sft_fraction: f64,
}

impl Default for StrategySection {
    fn default() -> Self {
        let cl = CLConfig::default();
        Self {
            kind: StrategyKind::Replay,
            epochs: cl.epochs,
            initial_epochs: 200,
            lr: cl.lr,
            batch_size: cl.batch_size,
            lambda_distill: cl.lambda_distill,
            score_kind: cl.score_kind,
            plan: cl.plan,
            lora: None,
            test_per_group: 10,
            train_groups: Vec::new(),
            sft_groups: Vec::new(),
            sft_fraction: 0.1,
        }
    }
}

/// Everything one experiment needs; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; component seeds are derived from it.
    pub seed: u64,
    pub out: PathBuf,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub loss: LossConfig,
    pub strategy: StrategySection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("runs/default"),
            dataset: DatasetSection::default(),
            model: ModelSection::default(),
            loss: LossConfig::default(),
            strategy: StrategySection::default(),
        }
    }
}

/// Derived seeds recorded in manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    pub dataset: u64,
    pub model: u64,
    pub training: u64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config `{}`: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        if d.schedule.is_empty() {
            return Err(Error::Config("dataset.schedule: at least one group is required".into()));
        }
        if d.nx < 3 {
            return Err(Error::Config(format!("dataset.nx: must be at least 3, got {}", d.nx)));
        }
        if d.samples_per_group <= self.strategy.test_per_group {
            return Err(Error::Config(format!(
                "strategy.test_per_group: {} leaves no training samples out of {}",
                self.strategy.test_per_group, d.samples_per_group
            )));
        }
        if !(d.length_scale > 0.0) {
            return Err(Error::Config("dataset.length_scale: must be positive".into()));
        }
        self.model.transolver().map_err(|e| Error::Config(format!("model: {e}")))?;
        if !(0.0..=1.0).contains(&self.strategy.sft_fraction) {
            return Err(Error::Config("strategy.sft_fraction: must lie in [0, 1]".into()));
        }
        let ids: Vec<u32> = d.schedule.iter().map(|g| g.group_id).collect();
        for g in self.strategy.train_groups.iter().chain(&self.strategy.sft_groups) {
            if !ids.contains(g) {
                return Err(Error::Config(format!("strategy: group {g} is not in dataset.schedule")));
            }
        }
        self.cl_config(0).validate()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            master: self.seed,
            dataset: self.seed,
            model: derive_seed(self.seed, 0x6d6f_64656c, 0),
            training: derive_seed(self.seed, 0x7472_61696e, 0),
        }
    }

    pub fn cl_config(&self, epochs: usize) -> CLConfig {
        let s = &self.strategy;
        CLConfig {
            lambda_distill: s.lambda_distill,
            loss: self.loss,
            lora: s.lora.clone(),
            epochs,
            lr: s.lr,
            batch_size: s.batch_size,
            seed: self.seeds().training,
            forcing: self.dataset.forcing,
            score_kind: s.score_kind,
            plan: s.plan,
        }
    }

    pub fn sequence_config(&self) -> Result<SequenceConfig> {
        Ok(SequenceConfig {
            cl: self.cl_config(self.strategy.epochs),
            model: self.model.transolver()?,
            model_seed: self.seeds().model,
            test_per_group: self.strategy.test_per_group,
            initial_epochs: Some(self.strategy.initial_epochs),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = ExperimentConfig::from_toml(
            "seed = 9\n[dataset]\nnx = 16\nsamples_per_group = 12\n[strategy]\nkind = \"naive\"\ntest_per_group = 2\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.dataset.nx, 16);
        assert_eq!(c.strategy.kind, StrategyKind::Naive);
        assert_eq!(c.model, ModelSection::default());
    }

    #[test]
    fn field_level_errors() {
        let e = ExperimentConfig::from_toml("[model]\nchannels = 30\nheads = 4\n").unwrap_err();
        assert!(e.to_string().contains("model"), "{e}");
        let e = ExperimentConfig::from_toml("[dataset]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = ExperimentConfig::from_toml("[strategy]\ntrain_groups = [42]\n").unwrap_err();
        assert!(e.to_string().contains("42"), "{e}");
        let e = ExperimentConfig::load(Path::new("/nonexistent/exp.toml")).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/exp.toml"));
    }
}
