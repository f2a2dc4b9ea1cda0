//! Conditional VAE path planner: neighbor, goal and trajectory encoders, a
//! latent encoder and a decoder, trained on reconstruction, KL and
//! locomotion-safety losses.

mod checkpoint;
mod config;
mod eval;
mod model;
mod predict;
mod train;

pub use checkpoint::{from_json, load_model, save_model, to_json, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{OptimizerKind, PlannerConfig};
pub use eval::{evaluate, summarize, EvalReport, SampleMetrics, Summary};
pub use model::{canonical_neighbors, Mlp, PlanInput, PlannerModel, TrainingMeta};
pub use predict::PredictMode;
pub use train::{draw_noise, train, train_step, LossBreakdown, OptimizerState, TrainReport};

use thiserror::Error;

use crate::diffmath::DiffError;
use crate::stl::StlError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlannerError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("training diverged on sample {sample}")]
    Divergence { sample: String },
    #[error("checkpoint version {found} is not supported (this build reads {supported})")]
    Version { found: u32, supported: u32 },
    #[error("load error: {0}")]
    Load(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Stl(#[from] StlError),
}
