//! Transolver neural operator.
//!
//! Grid nodes become points with features `(x, y, k)`. An MLP encoder lifts
//! them to `C` channels; each layer softly assigns points to `S` slices,
//! aggregates slice tokens, runs multi-head attention among the tokens and
//! scatters the result back to the points. A decoder maps to one channel.

mod config;
mod io;
mod lora;
mod model;

pub use config::TransolverConfig;
pub use io::{load_model, save_model, sidecar_path, ModelHeader};
pub use lora::{default_targets, LoraAdapter, LoraConfig, LoraInit, LORA_INIT_STD};
pub use model::{deslice, layer_param, point_features, slice_tokens, TransolverModel};
