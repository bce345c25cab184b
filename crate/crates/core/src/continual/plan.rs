use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::physics::ScoredSample;
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Result};

/// Fractions of past and new samples replayed in one stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReplayPlan {
    pub past_fraction: f64,
    pub past_worst_fraction: f64,
    pub past_random_fraction: f64,
    pub new_fraction: f64,
    pub new_worst_fraction: f64,
    pub new_random_fraction: f64,
}

impl Default for ReplayPlan {
    fn default() -> Self {
        Self {
            past_fraction: 0.10,
            past_worst_fraction: 0.08,
            past_random_fraction: 0.02,
            new_fraction: 0.80,
            new_worst_fraction: 0.64,
            new_random_fraction: 0.16,
        }
    }
}

impl ReplayPlan {
    pub fn new(past_worst: f64, past_random: f64, new_worst: f64, new_random: f64) -> Result<Self> {
        let p = Self {
            past_fraction: past_worst + past_random,
            past_worst_fraction: past_worst,
            past_random_fraction: past_random,
            new_fraction: new_worst + new_random,
            new_worst_fraction: new_worst,
            new_random_fraction: new_random,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.past_fraction,
            self.past_worst_fraction,
            self.past_random_fraction,
            self.new_fraction,
            self.new_worst_fraction,
            self.new_random_fraction,
        ];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Config(format!("replay fractions must lie in [0, 1]: {all:?}")));
        }
        for (name, total, w, r) in [
            ("past", self.past_fraction, self.past_worst_fraction, self.past_random_fraction),
            ("new", self.new_fraction, self.new_worst_fraction, self.new_random_fraction),
        ] {
            if (w + r - total).abs() > 1e-9 {
                return Err(Error::Config(format!("{name}: worst {w} + random {r} != total {total}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Past,
    New,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pick {
    Worst,
    Random,
}

/// One replayed sample with its provenance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selected {
    pub group_id: u32,
    pub sample_index: usize,
    pub source: Source,
    pub pick: Pick,
}

/// `round(fraction · n)`, at least one when both are positive.
pub fn plan_count(fraction: f64, n: usize) -> usize {
    if fraction <= 0.0 || n == 0 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n)
}

/// Worst first: sentinels, then descending score, ties by `(group_id, sample_index)`.
pub fn rank_worst(scored: &[ScoredSample]) -> Vec<ScoredSample> {
    let mut v = scored.to_vec();
    v.sort_by(|a, b| {
        b.sentinel
            .cmp(&a.sentinel)
            .then(b.score.total_cmp(&a.score))
            .then((a.group_id, a.sample_index).cmp(&(b.group_id, b.sample_index)))
    });
    v
}

fn pick_from(
    scored: &[ScoredSample],
    worst_fraction: f64,
    random_fraction: f64,
    source: Source,
    seed: u64,
) -> Result<Vec<Selected>> {
    if scored.is_empty() {
        if worst_fraction + random_fraction > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "{source:?} pool is empty but its replay fraction is positive"
            )));
        }
        return Ok(Vec::new());
    }
    let n = scored.len();
    let n_worst = plan_count(worst_fraction, n);
    let n_random = plan_count(random_fraction, n).min(n - n_worst);
    let ranked = rank_worst(scored);
    let tag = |s: &ScoredSample, pick| Selected { group_id: s.group_id, sample_index: s.sample_index, source, pick };
    let mut out: Vec<Selected> = ranked[..n_worst].iter().map(|s| tag(s, Pick::Worst)).collect();
    let mut rest: Vec<&ScoredSample> = ranked[n_worst..].iter().collect();
    rest.sort_by_key(|s| (s.group_id, s.sample_index));
    let stream = match source {
        Source::Past => 0,
        Source::New => 1,
    };
    rest.shuffle(&mut rng_from(derive_seed(seed, 0x5e1ec7, stream)));
    out.extend(rest[..n_random].iter().map(|s| tag(s, Pick::Random)));
    Ok(out)
}

/// Builds `D_mix`: worst-scored plus seeded random samples from each pool.
pub fn select_replay(
    scored_past: &[ScoredSample],
    scored_new: &[ScoredSample],
    plan: &ReplayPlan,
    seed: u64,
) -> Result<Vec<Selected>> {
    plan.validate()?;
    let mut mix = pick_from(scored_past, plan.past_worst_fraction, plan.past_random_fraction, Source::Past, seed)?;
    mix.extend(pick_from(scored_new, plan.new_worst_fraction, plan.new_random_fraction, Source::New, seed)?);
    Ok(mix)
}
