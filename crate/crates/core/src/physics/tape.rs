//! Graph-node versions of the losses, used when training.
//!
//! Predictions are `N×1` columns in grid order. Every function here has a
//! plain counterpart in `loss.rs`; tests check the two agree.

use super::loss::{BoundaryMode, LossConfig, LossForm, PdeForm};
use super::stencil::{grid_ops, GridOps};
use crate::data::GridField;
use crate::diffcore::{Graph, Tensor, Var};
use crate::{Error, Result};

fn column(values: &[f64]) -> Tensor {
    Tensor::matrix(values.len(), 1, values.to_vec()).expect("non-empty column")
}

fn column_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Tensor {
    column(&a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect::<Vec<_>>())
}

/// Final prediction node from the raw network output.
pub fn masked_prediction(g: &mut Graph, t_raw: Var, nx: usize, ny: usize, mode: BoundaryMode) -> Result<Var> {
    match mode {
        BoundaryMode::Penalty => Ok(t_raw),
        BoundaryMode::HardMask => {
            let ops = grid_ops(nx, ny);
            let b = g.constant(column(&ops.bubble));
            g.mul(t_raw, b)
        }
    }
}

fn strong_node(g: &mut Graph, ops: &GridOps, k: &GridField, q: &GridField, t: Var, cfg: &LossConfig) -> Result<Var> {
    let kc = g.constant(column(k.values()));
    let qc = g.constant(column(q.values()));
    let tx = g.sparse(&ops.dx, t)?;
    let ty = g.sparse(&ops.dy, t)?;
    let fx = g.mul(kc, tx)?;
    let fy = g.mul(kc, ty)?;
    let dfx = g.sparse(&ops.dx, fx)?;
    let dfy = g.sparse(&ops.dy, fy)?;
    let div = g.add(dfx, dfy)?;
    let r = g.add(div, qc)?;
    let mask = g.constant(column(&ops.interior));
    let ri = g.mul(r, mask)?;
    let r2 = g.mul(ri, ri)?;
    let s = g.sum(r2);
    let interior = g.scale(s, 1.0 / ops.interior_count() as f64);
    if cfg.boundary_mode == BoundaryMode::HardMask {
        return Ok(interior);
    }
    let bmask = g.constant(column(&ops.boundary));
    let tb = g.mul(t, bmask)?;
    let tb2 = g.mul(tb, tb)?;
    let sb = g.sum(tb2);
    let pen = g.scale(sb, cfg.penalty_weight / ops.boundary_count() as f64);
    g.add(interior, pen)
}

fn energy_node(g: &mut Graph, ops: &GridOps, k: &GridField, q: &GridField, t: Var) -> Result<Var> {
    let half_wk = g.constant(column_map(&ops.quad_weights, k.values(), |w, kk| 0.5 * w * kk));
    let wq = g.constant(column_map(&ops.quad_weights, q.values(), |w, qq| w * qq));
    let tx = g.sparse(&ops.dx, t)?;
    let ty = g.sparse(&ops.dy, t)?;
    let tx2 = g.mul(tx, tx)?;
    let ty2 = g.mul(ty, ty)?;
    let grad2 = g.add(tx2, ty2)?;
    let dens = g.mul(half_wk, grad2)?;
    let stored = g.sum(dens);
    let load = g.mul(wq, t)?;
    let work = g.sum(load);
    g.sub(stored, work)
}

/// Mean squared difference between a prediction node and a fixed field.
pub fn mse_to_target(g: &mut Graph, t: Var, target: &[f64]) -> Result<Var> {
    if g.value(t).len() != target.len() {
        return Err(Error::shape("mse_to_target", format!("{} vs {}", g.value(t).len(), target.len())));
    }
    let c = g.constant(column(target));
    let d = g.sub(t, c)?;
    let d2 = g.mul(d, d)?;
    Ok(g.mean(d2))
}

/// Per-sample training loss for `cfg.form`, from the raw output `t_raw`.
pub fn sample_loss(
    g: &mut Graph,
    cfg: &LossConfig,
    k: &GridField,
    q: &GridField,
    t_raw: Var,
    label: Option<&GridField>,
) -> Result<Var> {
    cfg.validate()?;
    let ops = grid_ops(k.nx(), k.ny());
    let t = masked_prediction(g, t_raw, k.nx(), k.ny(), cfg.boundary_mode)?;
    let need_label = || label.ok_or_else(|| Error::InvalidArgument(format!("{:?} loss needs labels", cfg.form)));
    match cfg.form {
        LossForm::Data => mse_to_target(g, t, need_label()?.values()),
        LossForm::Strong => strong_node(g, &ops, k, q, t, cfg),
        LossForm::Energy => energy_node(g, &ops, k, q, t),
        LossForm::Hybrid => {
            let d = mse_to_target(g, t, need_label()?.values())?;
            let p = match cfg.hybrid_pde {
                PdeForm::Strong => strong_node(g, &ops, k, q, t, cfg)?,
                PdeForm::Energy => energy_node(g, &ops, k, q, t)?,
            };
            let lp = g.scale(p, cfg.hybrid_lambda);
            g.add(d, lp)
        }
    }
}
