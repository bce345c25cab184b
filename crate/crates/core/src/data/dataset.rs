use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grf::{make_permeability, sample_grf};
use super::grid::GridField;
use crate::rng::{derive_seed, GENERATOR_NAME};
use crate::{Error, Result};

pub const DEFAULT_LENGTH_SCALE: f64 = 0.1;

/// One Darcy instance: permeability plus an optional reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSample {
    pub k: GridField,
    pub label: Option<GridField>,
}

impl GridSample {
    pub fn unlabeled(k: GridField) -> Self {
        Self { k, label: None }
    }
}

/// `(μ, σ)` for one group of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub group_id: u32,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleGroup {
    pub group_id: u32,
    pub mu: f64,
    pub sigma: f64,
    pub samples: Vec<GridSample>,
}

impl SampleGroup {
    pub fn spec(&self) -> GroupSpec {
        GroupSpec { group_id: self.group_id, mu: self.mu, sigma: self.sigma }
    }

    pub fn is_labeled(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.label.is_some())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub nx: usize,
    pub ny: usize,
    pub groups: Vec<SampleGroup>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u32> = self.groups.iter().map(|g| g.group_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate group id".into()));
        }
        for g in &self.groups {
            for (i, s) in g.samples.iter().enumerate() {
                if s.k.nx() != self.nx || s.k.ny() != self.ny {
                    return Err(Error::InvalidArgument(format!("group {} sample {i}: grid size differs", g.group_id)));
                }
                if s.k.values().iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "group {} sample {i}: permeability must be positive",
                        g.group_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn group(&self, group_id: u32) -> Option<&SampleGroup> {
        self.groups.iter().find(|g| g.group_id == group_id)
    }

    pub fn sample_count(&self) -> usize {
        self.groups.iter().map(|g| g.samples.len()).sum()
    }

    pub fn is_labeled(&self) -> bool {
        self.groups.iter().all(SampleGroup::is_labeled)
    }
}

/// The ten `(μ, σ)` pairs of the Darcy out-of-distribution schedule, ids 1..=10.
pub fn default_schedule() -> Vec<GroupSpec> {
    [
        (-1.0, 0.2),
        (-0.7, 0.35),
        (-0.4, 0.5),
        (-0.1, 0.6),
        (0.2, 0.7),
        (0.5, 0.8),
        (0.8, 0.9),
        (1.1, 1.0),
        (1.4, 1.1),
        (1.7, 1.3),
    ]
    .iter()
    .enumerate()
    .map(|(i, &(mu, sigma))| GroupSpec { group_id: i as u32 + 1, mu, sigma })
    .collect()
}

/// Regenerates one sample from its coordinates alone.
pub fn generate_sample(spec: GroupSpec, index: usize, nx: usize, length_scale: f64, seed: u64) -> Result<GridSample> {
    let s = derive_seed(seed, spec.group_id as u64, index as u64);
    let g = sample_grf(nx, nx, length_scale, s)?;
    Ok(GridSample::unlabeled(make_permeability(&g, spec.mu, spec.sigma)?))
}

/// One group per schedule entry, `samples_per_group` unlabeled samples each.
pub fn generate_groups(
    schedule: &[GroupSpec],
    samples_per_group: usize,
    nx: usize,
    length_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("schedule is empty".into()));
    }
    if samples_per_group == 0 {
        return Err(Error::InvalidArgument("samples_per_group must be at least 1".into()));
    }
    let mut ids: Vec<u32> = schedule.iter().map(|s| s.group_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!("duplicate group id {}", w[0])));
    }
    let groups = schedule
        .iter()
        .map(|&spec| {
            let samples = (0..samples_per_group)
                .into_par_iter()
                .map(|i| generate_sample(spec, i, nx, length_scale, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok(SampleGroup { group_id: spec.group_id, mu: spec.mu, sigma: spec.sigma, samples })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { nx, ny: nx, groups })
}

/// Companion text record for a dataset file; enough to regenerate it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub generator: String,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub length_scale: f64,
    pub samples_per_group: usize,
    pub schedule: Vec<GroupSpec>,
    pub forcing: f64,
    pub labeled: bool,
}

impl DatasetManifest {
    pub fn new(schedule: &[GroupSpec], samples_per_group: usize, nx: usize, length_scale: f64, seed: u64) -> Self {
        Self {
            format_version: super::io::DATASET_VERSION,
            generator: GENERATOR_NAME.to_string(),
            seed,
            nx,
            ny: nx,
            length_scale,
            samples_per_group,
            schedule: schedule.to_vec(),
            forcing: 1.0,
            labeled: false,
        }
    }
}
