//! Finite-volume reference solver for `−∇·(k∇T) = q`, `T = 0` on the boundary.
//!
//! Unknowns are the interior grid nodes. Each node exchanges flux with its
//! four neighbours through faces whose permeability is the harmonic mean of
//! the two node values. The resulting matrix is symmetric positive definite
//! and is solved with unpreconditioned conjugate gradients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GridField};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖q − A·T‖ / ‖q‖` recomputed from the returned solution.
    pub final_residual_norm: f64,
    pub converged: bool,
}

struct Stiffness {
    nx: usize,
    ny: usize,
    /// Face between `(i, j)` and `(i+1, j)`, divided by `hx²`.
    east: Vec<f64>,
    /// Face between `(i, j)` and `(i, j+1)`, divided by `hy²`.
    north: Vec<f64>,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

impl Stiffness {
    fn new(k: &GridField) -> Self {
        let (nx, ny) = (k.nx(), k.ny());
        let (ihx2, ihy2) = (1.0 / (k.hx() * k.hx()), 1.0 / (k.hy() * k.hy()));
        let mut east = vec![0.0; nx * ny];
        let mut north = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                if i + 1 < nx {
                    east[j * nx + i] = harmonic(k.at(i, j), k.at(i + 1, j)) * ihx2;
                }
                if j + 1 < ny {
                    north[j * nx + i] = harmonic(k.at(i, j), k.at(i, j + 1)) * ihy2;
                }
            }
        }
        Self { nx, ny, east, north }
    }

    /// `y = A·x` over the full grid; boundary entries of `x` are ignored
    /// (treated as zero) and boundary entries of `y` are zero.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nx = self.nx;
        for j in 1..self.ny - 1 {
            for i in 1..nx - 1 {
                let p = j * nx + i;
                let (ce, cw, cn, cs) = (self.east[p], self.east[p - 1], self.north[p], self.north[p - nx]);
                let inner = |q: usize, ii: usize, jj: usize| {
                    if ii == 0 || jj == 0 || ii == nx - 1 || jj == self.ny - 1 {
                        0.0
                    } else {
                        x[q]
                    }
                };
                y[p] = (ce + cw + cn + cs) * x[p]
                    - ce * inner(p + 1, i + 1, j)
                    - cw * inner(p - 1, i - 1, j)
                    - cn * inner(p + nx, i, j + 1)
                    - cs * inner(p - nx, i, j - 1);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the Darcy problem to relative residual `tol`.
pub fn solve_darcy(k: &GridField, q: &GridField, tol: f64) -> Result<(GridField, SolveReport)> {
    k.check_same(q, "solve_darcy")?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if k.values().iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("permeability must be strictly positive".into()));
    }
    let (nx, ny) = (k.nx(), k.ny());
    let n = nx * ny;
    let a = Stiffness::new(k);
    let interior = |p: usize| {
        let (i, j) = (p % nx, p / nx);
        i > 0 && j > 0 && i < nx - 1 && j < ny - 1
    };
    let b: Vec<f64> = (0..n).map(|p| if interior(p) { q.values()[p] } else { 0.0 }).collect();
    let bnorm = dot(&b, &b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        let report = SolveReport { iterations: 0, final_residual_norm: 0.0, converged: true };
        return Ok((GridField::new(nx, ny, x)?, report));
    }

    let cap = 10 * n;
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < cap && rr.sqrt() > tol * bnorm {
        a.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }

    a.apply(&x, &mut ap);
    let res: f64 = (0..n).map(|i| (b[i] - ap[i]).powi(2)).sum::<f64>().sqrt() / bnorm;
    let report = SolveReport { iterations, final_residual_norm: res, converged: res <= tol };
    if !report.converged {
        return Err(Error::NotConverged(report));
    }
    Ok((GridField::new(nx, ny, x)?, report))
}

/// Attaches reference solutions (constant forcing `q`) to every sample.
pub fn label_dataset(d: &mut Dataset, forcing: f64, tol: f64) -> Result<()> {
    let q = GridField::constant(d.nx, d.ny, forcing)?;
    for g in &mut d.groups {
        let labels =
            g.samples.par_iter().map(|s| solve_darcy(&s.k, &q, tol).map(|(t, _)| t)).collect::<Result<Vec<_>>>()?;
        for (s, t) in g.samples.iter_mut().zip(labels) {
            s.label = Some(t);
        }
    }
    Ok(())
}
