use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::loss::{energy_functional, strong_residual};
use super::stencil::grid_ops;
use crate::data::GridField;
use crate::{Error, Result};

/// Guard added to denominators of both scores.
pub const SCORE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Strong,
    Energy,
}

impl ScoreKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Strong => "strong",
            ScoreKind::Energy => "energy",
        }
    }
}

/// Label-free PDE score of one prediction. Larger is worse; a sentinel score
/// (`+∞`) marks a prediction whose normalization degenerated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredSample {
    pub group_id: u32,
    pub sample_index: usize,
    pub score: f64,
    pub kind: ScoreKind,
    pub sentinel: bool,
}

/// `sqrt(mean_i r_i² / (q_i² + ε))` over interior nodes.
pub fn strong_score(k: &GridField, t: &GridField, q: &GridField) -> Result<f64> {
    let r = strong_residual(k, t, q)?;
    let ops = grid_ops(k.nx(), k.ny());
    let s: f64 = (0..k.len())
        .filter(|&p| ops.interior[p] > 0.0)
        .map(|p| r.values()[p].powi(2) / (q.values()[p].powi(2) + SCORE_EPS))
        .sum();
    Ok((s / ops.interior_count() as f64).sqrt())
}

/// Energy normalized by `A·∫qT` (unit-square area `A = 1`). Returns
/// `(+∞, true)` when `|∫qT| < ε`.
///
/// At the exact minimizer the value is `−½`; larger (less negative) values
/// are farther from the minimum.
pub fn energy_score(k: &GridField, t: &GridField, q: &GridField) -> Result<(f64, bool)> {
    let ops = grid_ops(k.nx(), k.ny());
    let work: f64 = (0..k.len()).map(|p| ops.quad_weights[p] * q.values()[p] * t.values()[p]).sum();
    if work.abs() < SCORE_EPS {
        return Ok((f64::INFINITY, true));
    }
    let area = 1.0;
    Ok((energy_functional(k, t, q)? / (area * work), false))
}

/// Scores a prediction that already satisfies the boundary condition.
pub fn score_field(
    kind: ScoreKind,
    k: &GridField,
    t: &GridField,
    q: &GridField,
    group_id: u32,
    sample_index: usize,
) -> Result<ScoredSample> {
    let (score, sentinel) = match kind {
        ScoreKind::Strong => (strong_score(k, t, q)?, false),
        ScoreKind::Energy => energy_score(k, t, q)?,
    };
    let sentinel = sentinel || !score.is_finite();
    let score = if sentinel { f64::INFINITY } else { score };
    Ok(ScoredSample { group_id, sample_index, score, kind, sentinel })
}

/// Delimited text: `group_id,sample_index,score_kind,score,sentinel_flag`.
pub fn write_score_dump<W: Write>(mut w: W, scores: &[ScoredSample]) -> Result<()> {
    writeln!(w, "group_id,sample_index,score_kind,score,sentinel_flag")?;
    for s in scores {
        writeln!(w, "{},{},{},{:e},{}", s.group_id, s.sample_index, s.kind.as_str(), s.score, u8::from(s.sentinel))?;
    }
    Ok(())
}

pub fn read_score_dump<R: BufRead>(r: R) -> Result<Vec<ScoredSample>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Malformed(format!("score dump line {}: `{line}`", n + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        let kind = match f[2] {
            "strong" => ScoreKind::Strong,
            "energy" => ScoreKind::Energy,
            _ => return Err(bad()),
        };
        out.push(ScoredSample {
            group_id: f[0].parse().map_err(|_| bad())?,
            sample_index: f[1].parse().map_err(|_| bad())?,
            kind,
            score: f[3].parse().map_err(|_| bad())?,
            sentinel: f[4] == "1",
        });
    }
    Ok(out)
}
