//! Config-driven pipelines behind the `pncl` binary.
//!
//! Each [`Command`] reads its inputs from and writes its artifacts to the
//! configured output directory, together with a JSON manifest recording the
//! effective configuration, derived seeds and format versions.

mod config;
mod run;

pub use config::{DatasetSection, ExperimentConfig, ModelSection, Seeds, StrategyKind, StrategySection};
pub use run::{run, Command, RunOptions, DATASET_FILE, LABELED_FILE, MODEL_FILE};
