use serde::{Deserialize, Serialize};

use super::stencil::{grad_field, grid_ops};
use crate::data::GridField;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossForm {
    Data,
    Strong,
    Energy,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeForm {
    Strong,
    Energy,
}

/// How `T = 0` on the boundary is imposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Multiply the raw output by a bubble function that vanishes on Γ.
    HardMask,
    /// Leave the output alone and add `β · mean(T_Γ²)` to the loss.
    Penalty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub form: LossForm,
    pub boundary_mode: BoundaryMode,
    pub penalty_weight: f64,
    /// Weight of the PDE term in `L_data + λ·L_pde`.
    pub hybrid_lambda: f64,
    pub hybrid_pde: PdeForm,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            form: LossForm::Energy,
            boundary_mode: BoundaryMode::HardMask,
            penalty_weight: 1.0,
            hybrid_lambda: 1.0,
            hybrid_pde: PdeForm::Energy,
        }
    }
}

impl LossConfig {
    pub fn strong() -> Self {
        Self { form: LossForm::Strong, boundary_mode: BoundaryMode::Penalty, ..Self::default() }
    }

    pub fn data() -> Self {
        Self { form: LossForm::Data, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_weight >= 0.0) {
            return Err(Error::Config(format!("penalty_weight must be >= 0, got {}", self.penalty_weight)));
        }
        if !(self.hybrid_lambda >= 0.0) {
            return Err(Error::Config(format!("hybrid_lambda must be >= 0, got {}", self.hybrid_lambda)));
        }
        let energy =
            self.form == LossForm::Energy || (self.form == LossForm::Hybrid && self.hybrid_pde == PdeForm::Energy);
        if energy && self.boundary_mode == BoundaryMode::Penalty {
            return Err(Error::Config("energy form requires the hard_mask boundary mode".into()));
        }
        Ok(())
    }

    pub fn needs_labels(&self) -> bool {
        matches!(self.form, LossForm::Data | LossForm::Hybrid)
    }
}

/// Imposes the homogeneous Dirichlet condition according to `mode`.
pub fn apply_dirichlet(t_raw: &GridField, mode: BoundaryMode) -> GridField {
    match mode {
        BoundaryMode::Penalty => t_raw.clone(),
        BoundaryMode::HardMask => {
            let ops = grid_ops(t_raw.nx(), t_raw.ny());
            let v = t_raw.values().iter().zip(&ops.bubble).map(|(t, b)| t * b).collect();
            GridField::new(t_raw.nx(), t_raw.ny(), v).expect("finite")
        }
    }
}

/// `r = ∇·(k∇T) + q` on interior nodes, zero on the boundary.
pub fn strong_residual(k: &GridField, t: &GridField, q: &GridField) -> Result<GridField> {
    k.check_same(t, "strong_residual")?;
    k.check_same(q, "strong_residual")?;
    let ops = grid_ops(k.nx(), k.ny());
    let (tx, ty) = grad_field(t);
    let fx: Vec<f64> = k.values().iter().zip(tx.values()).map(|(a, b)| a * b).collect();
    let fy: Vec<f64> = k.values().iter().zip(ty.values()).map(|(a, b)| a * b).collect();
    let div_x = ops.dx.apply(&fx);
    let div_y = ops.dy.apply(&fy);
    let r = (0..k.len()).map(|p| ops.interior[p] * (div_x[p] + div_y[p] + q.values()[p])).collect();
    GridField::new(k.nx(), k.ny(), r)
}

fn boundary_penalty(t: &GridField) -> f64 {
    let ops = grid_ops(t.nx(), t.ny());
    let s: f64 = t.values().iter().zip(&ops.boundary).map(|(v, b)| b * v * v).sum();
    s / ops.boundary_count() as f64
}

/// Mean squared interior residual plus the boundary penalty (penalty mode).
pub fn strong_loss(k: &GridField, t_raw: &GridField, q: &GridField, cfg: &LossConfig) -> Result<f64> {
    let t = apply_dirichlet(t_raw, cfg.boundary_mode);
    let r = strong_residual(k, &t, q)?;
    let ops = grid_ops(k.nx(), k.ny());
    let interior = r.values().iter().map(|v| v * v).sum::<f64>() / ops.interior_count() as f64;
    let boundary = match cfg.boundary_mode {
        BoundaryMode::HardMask => 0.0,
        BoundaryMode::Penalty => cfg.penalty_weight * boundary_penalty(&t),
    };
    Ok(interior + boundary)
}

/// Trapezoidal `∫ ½k|∇T|² − qT` for a field that already satisfies the
/// boundary condition.
pub fn energy_functional(k: &GridField, t: &GridField, q: &GridField) -> Result<f64> {
    k.check_same(t, "energy_functional")?;
    k.check_same(q, "energy_functional")?;
    let ops = grid_ops(k.nx(), k.ny());
    let (tx, ty) = grad_field(t);
    Ok((0..k.len())
        .map(|p| {
            let g2 = tx.values()[p].powi(2) + ty.values()[p].powi(2);
            ops.quad_weights[p] * (0.5 * k.values()[p] * g2 - q.values()[p] * t.values()[p])
        })
        .sum())
}

pub fn energy_loss(k: &GridField, t_raw: &GridField, q: &GridField, cfg: &LossConfig) -> Result<f64> {
    if cfg.boundary_mode != BoundaryMode::HardMask {
        return Err(Error::Config("energy form requires the hard_mask boundary mode".into()));
    }
    energy_functional(k, &apply_dirichlet(t_raw, cfg.boundary_mode), q)
}

/// Mean squared error over all nodes.
pub fn data_loss(t: &GridField, label: Option<&GridField>) -> Result<f64> {
    let label = label.ok_or_else(|| Error::InvalidArgument("data loss needs a label".into()))?;
    t.check_same(label, "data_loss")?;
    Ok(t.values().iter().zip(label.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64)
}

/// `L_data + λ·L_pde`.
pub fn combine_losses(l_data: f64, l_pde: f64, lambda: f64) -> f64 {
    l_data + lambda * l_pde
}

/// Relative `L2` and `H1` errors of `t` against `t_ref`, node-wise sums.
pub fn relative_errors(t: &GridField, t_ref: &GridField) -> Result<(f64, f64)> {
    t.check_same(t_ref, "relative_errors")?;
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let diff = GridField::new(t.nx(), t.ny(), t.values().iter().zip(t_ref.values()).map(|(a, b)| a - b).collect())?;
    let ref_l2 = sq(t_ref.values());
    if ref_l2 == 0.0 {
        return Err(Error::InvalidArgument("reference field has zero norm".into()));
    }
    let diff_l2 = sq(diff.values());
    let (dx, dy) = grad_field(&diff);
    let (rx, ry) = grad_field(t_ref);
    let rel_l2 = (diff_l2 / ref_l2).sqrt();
    let rel_h1 = ((diff_l2 + sq(dx.values()) + sq(dy.values())) / (ref_l2 + sq(rx.values()) + sq(ry.values()))).sqrt();
    Ok((rel_l2, rel_h1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sinsin(n: usize) -> GridField {
        GridField::from_fn(n, n, |x, y| (PI * x).sin() * (PI * y).sin()).unwrap()
    }

    // The composed divergence is first order on the ring next to the
    // boundary (one-sided flux stencils); measure order away from it.
    fn max_abs_deep(f: &GridField) -> f64 {
        let mut m: f64 = 0.0;
        for j in 2..f.ny() - 2 {
            for i in 2..f.nx() - 2 {
                m = m.max(f.at(i, j).abs());
            }
        }
        m
    }

    #[test]
    fn hard_mask_boundary_and_center() {
        let raw = GridField::from_fn(9, 9, |x, y| 1.0 + x + 2.0 * y).unwrap();
        let t = apply_dirichlet(&raw, BoundaryMode::HardMask);
        for j in 0..9 {
            for i in 0..9 {
                if t.is_boundary(i, j) {
                    assert_eq!(t.at(i, j), 0.0);
                }
            }
        }
        assert_eq!(t.at(4, 4), raw.at(4, 4));
        assert_eq!(apply_dirichlet(&raw, BoundaryMode::Penalty), raw);
    }

    #[test]
    fn manufactured_residual_is_second_order() {
        let err = |n: usize| {
            let k = GridField::constant(n, n, 1.0).unwrap();
            let q = GridField::from_fn(n, n, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()).unwrap();
            max_abs_deep(&strong_residual(&k, &sinsin(n), &q).unwrap())
        };
        let ratio = err(33) / err(65);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn variable_coefficient_residual_is_second_order() {
        // k = 1 + x, T = sin(πx) sin(πy):
        // −∇·(k∇T) = −[π cos(πx) sin(πy) − (1+x) π² sin(πx) sin(πy) − (1+x) π² sin(πx) sin(πy)]
        let err = |n: usize| {
            let k = GridField::from_fn(n, n, |x, _| 1.0 + x).unwrap();
            let q = GridField::from_fn(n, n, |x, y| {
                let (sx, cx, sy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin());
                -(PI * cx * sy - 2.0 * (1.0 + x) * PI * PI * sx * sy)
            })
            .unwrap();
            max_abs_deep(&strong_residual(&k, &sinsin(n), &q).unwrap())
        };
        let ratio = err(33) / err(65);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_field_residual_equals_source() {
        let k = GridField::constant(7, 7, 1.0).unwrap();
        let q = GridField::constant(7, 7, 1.0).unwrap();
        let t = GridField::constant(7, 7, 0.0).unwrap();
        let r = strong_residual(&k, &t, &q).unwrap();
        for j in 1..6 {
            for i in 1..6 {
                assert_eq!(r.at(i, j), 1.0);
            }
        }
        assert_eq!(r.at(0, 3), 0.0);
    }

    #[test]
    fn strong_loss_closed_forms() {
        let n = 9;
        let k = GridField::constant(n, n, 1.0).unwrap();
        let zero = GridField::constant(n, n, 0.0).unwrap();
        let q = GridField::constant(n, n, 1.0).unwrap();
        let q2 = GridField::constant(n, n, 2.0).unwrap();
        for cfg in [LossConfig::strong(), LossConfig { form: LossForm::Strong, ..LossConfig::default() }] {
            let l1 = strong_loss(&k, &zero, &q, &cfg).unwrap();
            assert_eq!(l1, 1.0);
            assert_eq!(strong_loss(&k, &zero, &q2, &cfg).unwrap(), 4.0 * l1);
        }
    }

    #[test]
    fn strong_loss_manufactured_hard_mask_is_small() {
        // T = x(1−x)y(1−y) is a quadratic per axis, so every stencil is exact.
        let n = 33;
        let k = GridField::constant(n, n, 1.0).unwrap();
        let q = GridField::from_fn(n, n, |x, y| 2.0 * (x * (1.0 - x) + y * (1.0 - y))).unwrap();
        let raw = GridField::constant(n, n, 1.0 / 16.0).unwrap();
        let cfg = LossConfig { form: LossForm::Strong, ..LossConfig::default() };
        let h = 1.0 / (n as f64 - 1.0);
        let l = strong_loss(&k, &raw, &q, &cfg).unwrap();
        assert!(l < h.powi(4), "loss {l}");
    }

    #[test]
    fn penalty_adds_boundary_term() {
        let n = 5;
        let k = GridField::constant(n, n, 1.0).unwrap();
        let q = GridField::constant(n, n, 0.0).unwrap();
        let one = GridField::constant(n, n, 1.0).unwrap();
        let cfg = LossConfig { penalty_weight: 2.5, ..LossConfig::strong() };
        assert!((strong_loss(&k, &one, &q, &cfg).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn energy_closed_forms() {
        let n = 17;
        let k = GridField::constant(n, n, 1.0).unwrap();
        let q = GridField::constant(n, n, 1.0).unwrap();
        let zero = GridField::constant(n, n, 0.0).unwrap();
        assert_eq!(energy_loss(&k, &zero, &q, &LossConfig::default()).unwrap(), 0.0);

        let t = GridField::from_fn(n, n, |x, _| x).unwrap();
        let q0 = GridField::constant(n, n, 0.0).unwrap();
        assert!((energy_functional(&k, &t, &q0).unwrap() - 0.5).abs() < 1e-12);

        let cfg = LossConfig { boundary_mode: BoundaryMode::Penalty, ..LossConfig::default() };
        assert!(matches!(energy_loss(&k, &zero, &q, &cfg), Err(Error::Config(_))));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn data_loss_cases() {
        let a = GridField::from_fn(5, 5, |x, y| x * y).unwrap();
        let b = a.map(|v| v + 1.0).unwrap();
        assert_eq!(data_loss(&a, Some(&a)).unwrap(), 0.0);
        assert!((data_loss(&b, Some(&a)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(data_loss(&a, Some(&b)).unwrap(), data_loss(&b, Some(&a)).unwrap());
        assert!(data_loss(&a, None).is_err());
    }

    #[test]
    fn combine_is_linear() {
        assert_eq!(combine_losses(2.0, 5.0, 0.0), 2.0);
        assert_eq!(combine_losses(0.0, 5.0, 0.3), 0.3 * 5.0);
        let l = |d: f64, p: f64| combine_losses(d, p, 0.7);
        assert!((l(1.0 + 2.0, 4.0) - (l(1.0, 4.0) + l(2.0, 0.0))).abs() < 1e-14);
    }

    #[test]
    fn relative_error_cases() {
        let r = sinsin(9);
        assert_eq!(relative_errors(&r, &r).unwrap(), (0.0, 0.0));
        let twice = r.map(|v| 2.0 * v).unwrap();
        assert!((relative_errors(&twice, &r).unwrap().0 - 1.0).abs() < 1e-15);
        let t = GridField::from_fn(9, 9, |x, y| x * y * (1.0 - x)).unwrap();
        let (a, b) = relative_errors(&t, &r).unwrap();
        let (c, d) = relative_errors(&t.map(|v| -3.5 * v).unwrap(), &r.map(|v| -3.5 * v).unwrap()).unwrap();
        assert!((a - c).abs() < 1e-14 && (b - d).abs() < 1e-14);
        let zero = GridField::constant(9, 9, 0.0).unwrap();
        assert!(relative_errors(&t, &zero).is_err());
    }
}
