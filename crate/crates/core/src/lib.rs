//! Physics-informed Transolver training on Darcy flow, with replay-based
//! continual learning.
//!
//! The crate is organized bottom-up:
//!
//! - [`diffcore`]: dense `f64` tensors, a reverse-mode tape, Adam and the
//!   binary checkpoint format.
//! - [`data`]: grid fields, Gaussian-random-field permeability groups, TPMS
//!   voxel lattices and the dataset file format.
//! - [`transolver`]: the physics-attention neural operator and its LoRA adapters.
//! - [`physics`]: boundary enforcement, grid derivatives, strong/energy/data
//!   losses, label-free PDE scores and relative error metrics.
//! - [`oracle`]: finite-volume reference solver used for labels and evaluation.
//! - [`continual`]: joint / naive / replay / SFT training and the sequential
//!   ID-OOD harness producing [`continual::ErrorMatrix`] reports.
//! - [`experiment`]: TOML-configured pipelines behind the `pncl` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continual;
pub mod data;
pub mod diffcore;
pub mod error;
pub mod experiment;
pub mod oracle;
pub mod physics;
pub mod rng;
pub mod transolver;

pub use error::{Error, Result};
