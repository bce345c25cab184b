//! Dense tensors with reverse-mode differentiation.
//!
//! Graphs are built fresh for every evaluation: parameters enter a [`Graph`]
//! as leaves, operations append nodes, and [`Graph::backward`] walks the tape
//! once in reverse. Everything is `f64`; matrices are rank-2 row-major.

mod adam;
mod checkpoint;
mod fd;
mod graph;
mod params;
mod sparse;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fd::{finite_difference_grad, gradient_discrepancy};
pub use graph::{grad, Gradients, Graph, Var};
pub use params::ParamStore;
pub use sparse::CsrMatrix;
pub use tensor::Tensor;
