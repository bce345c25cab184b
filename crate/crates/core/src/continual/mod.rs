//! Training strategies and the sequential continual-learning harness.
//!
//! - [`train_baseline`]: plain training (joint or naive fine-tuning).
//! - [`replay_train`]: training on a replay mix with distillation towards the
//!   frozen incoming model.
//! - [`sft_train`]: supervised fine-tuning on a small labeled set with
//!   distillation on the rest.
//! - [`run_sequence`]: learns groups in order and records an [`ErrorMatrix`].

mod eval;
mod harness;
mod plan;
mod train;

pub use eval::{evaluate, mean_errors, score_dataset, ErrorMatrix, SampleError};
pub use harness::{
    evaluate_groups, replay_stage, run_sequence, split_group, SequenceConfig, SequenceResult, StageRecord,
};
pub use plan::{plan_count, rank_worst, select_replay, Pick, ReplayPlan, Selected, Source};
pub use train::{
    distill_mse, predictions, replay_train, sft_train, train_baseline, CLConfig, SampleRef, Strategy, TrainReport,
};
