//! Losses, metrics, the synthetic dataset, stage-wise training and evaluation.

mod config;
mod dataset;
mod eval;
mod losses;
mod metrics;
mod synth;
mod trainer;

pub use config::{ConsistencyTarget, LossWeights, TrainConfig};
pub use eval::{evaluate, freeze_baseline, EvalReport};
pub use losses::{loss_dist, loss_dist_reference, loss_motion, MotionLoss, MotionLossContext};
pub use metrics::{path_pose_error, FrameErrors, Metrics, MetricsTable, DEFAULT_HORIZONS};
pub use synth::{generate_synthetic, Dataset, Layout, LayoutSpec, MotionKind, Obstacle, Sample, Split, SynthConfig};
pub use trainer::{train_stagewise, Batch, EpochRecord, TrainOutput};

use crate::autodiff::AutodiffError;
use crate::body::BodyError;
use crate::geometry::GeometryError;
use crate::mutual::MutualError;
use crate::nets::NetError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("LengthMismatch: expected {expected} frames, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("NonFiniteLoss: stage {stage}, epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { stage: u32, epoch: usize, batch: usize, detail: String },
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("EmptySplit: no samples in split {0}")]
    EmptySplit(String),
    #[error("BadDataset: {0}")]
    BadDataset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Mutual(#[from] MutualError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
