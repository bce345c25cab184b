use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::SampleRef;
use crate::data::GridField;
use crate::physics::{apply_dirichlet, relative_errors, score_field, BoundaryMode, ScoreKind, ScoredSample};
use crate::transolver::TransolverModel;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub group_id: u32,
    pub sample_index: usize,
    pub rel_l2: f64,
    pub rel_h1: f64,
}

/// Relative errors of the boundary-enforced prediction against each label.
pub fn evaluate(model: &TransolverModel, samples: &[SampleRef], mode: BoundaryMode) -> Result<Vec<SampleError>> {
    samples
        .par_iter()
        .map(|s| {
            let label = s
                .sample
                .label
                .as_ref()
                .ok_or(Error::MissingLabel { group_id: s.group_id, sample_index: s.sample_index })?;
            let pred = apply_dirichlet(&model.predict(&s.sample.k)?, mode);
            let (rel_l2, rel_h1) = relative_errors(&pred, label)?;
            Ok(SampleError { group_id: s.group_id, sample_index: s.sample_index, rel_l2, rel_h1 })
        })
        .collect()
}

/// `(mean rel_L2, mean rel_H1)`.
pub fn mean_errors(errors: &[SampleError]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = errors.len() as f64;
    (errors.iter().map(|e| e.rel_l2).sum::<f64>() / n, errors.iter().map(|e| e.rel_h1).sum::<f64>() / n)
}

/// Label-free PDE score of the model's prediction for every sample.
pub fn score_dataset(
    model: &TransolverModel,
    samples: &[SampleRef],
    kind: ScoreKind,
    mode: BoundaryMode,
    forcing: f64,
) -> Result<Vec<ScoredSample>> {
    samples
        .par_iter()
        .map(|s| {
            let k = &s.sample.k;
            let q = GridField::constant(k.nx(), k.ny(), forcing)?;
            let pred = apply_dirichlet(&model.predict(k)?, mode);
            score_field(kind, k, &pred, &q, s.group_id, s.sample_index)
        })
        .collect()
}

/// Errors after each training stage (rows) on each test group (columns).
/// Row `m` was produced after learning groups `1..=m` of the sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMatrix {
    pub groups: Vec<u32>,
    pub rel_l2: Vec<Vec<f64>>,
    pub rel_h1: Vec<Vec<f64>>,
}

impl ErrorMatrix {
    pub fn new(groups: Vec<u32>) -> Self {
        Self { groups, rel_l2: Vec::new(), rel_h1: Vec::new() }
    }

    pub fn push_stage(&mut self, rel_l2: Vec<f64>, rel_h1: Vec<f64>) -> Result<()> {
        if rel_l2.len() != self.groups.len() || rel_h1.len() != self.groups.len() {
            return Err(Error::shape(
                "ErrorMatrix::push_stage",
                format!("{} groups, row of {}", self.groups.len(), rel_l2.len()),
            ));
        }
        if rel_l2.iter().chain(&rel_h1).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("error matrix entries must be non-negative".into()));
        }
        self.rel_l2.push(rel_l2);
        self.rel_h1.push(rel_h1);
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.rel_l2.len()
    }

    /// Column `col` is out of distribution at row `stage` (both 0-based).
    pub fn is_ood(&self, stage: usize, col: usize) -> bool {
        col > stage
    }

    pub fn ood_count(&self) -> usize {
        (0..self.stages()).map(|s| (0..self.groups.len()).filter(|&c| self.is_ood(s, c)).count()).sum()
    }

    /// Delimited text: `stage,group,rel_L2,rel_H1,ood_flag`; stages are 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "stage,group,rel_L2,rel_H1,ood_flag")?;
        for s in 0..self.stages() {
            for (c, g) in self.groups.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    s + 1,
                    g,
                    self.rel_l2[s][c],
                    self.rel_h1[s][c],
                    u8::from(self.is_ood(s, c))
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_ood_count() {
        let mut m = ErrorMatrix::new(vec![1, 2, 3]);
        for s in 0..3 {
            m.push_stage(vec![0.1 * (s + 1) as f64, 0.5, 1.0], vec![0.2, 0.25, 2.0]).unwrap();
        }
        assert_eq!(m.ood_count(), 3);
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "stage,group,rel_L2,rel_H1,ood_flag");
        assert_eq!(lines[1], "1,1,0.1,0.2,0");
        assert_eq!(lines[2], "1,2,0.5,0.25,1");
        assert_eq!(lines.len(), 10);
        assert!(m.push_stage(vec![0.1], vec![0.1]).is_err());
        assert!(m.push_stage(vec![-1.0, 0.0, 0.0], vec![0.0; 3]).is_err());
    }
}
