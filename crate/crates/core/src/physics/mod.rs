//! Darcy physics on grid fields: boundary enforcement, explicit derivative
//! stencils, strong/energy/data losses (both as plain functions and as graph
//! nodes for training), label-free PDE scores and relative error metrics.
//!
//! The governing problem is `−∇·(k∇T) = q` on the unit square with `T = 0`
//! on the boundary.

mod loss;
mod score;
mod stencil;
mod tape;

pub use loss::{
    apply_dirichlet, combine_losses, data_loss, energy_functional, energy_loss, relative_errors, strong_loss,
    strong_residual, BoundaryMode, LossConfig, LossForm, PdeForm,
};
pub use score::{
    energy_score, read_score_dump, score_field, strong_score, write_score_dump, ScoreKind, ScoredSample, SCORE_EPS,
};
pub use stencil::{grad_field, grid_ops, GridOps};
pub use tape::{masked_prediction, mse_to_target, sample_loss};
