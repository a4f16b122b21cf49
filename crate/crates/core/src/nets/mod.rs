//! Distance predictors, scene and motion encoders, and the motion forecaster.

mod layers;
mod model;
mod params;

pub use layers::{GcnLayer, GcnStack, Gru, Linear};
pub use model::{padded_coefficients, DistanceInputs, Features, Forecaster, Model, ModelConfig, MotionEncoder, SceneEncoder, Variant};
pub use params::{Adam, Bound, ParamId, ParamStore};

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("EmptyHistory: at least one observed frame is required")]
    EmptyHistory,
    #[error("NoDistancePredictor: the motion-only variant has no distance predictor")]
    NoDistancePredictor,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("ConfigMismatch: checkpoint was written for a different model configuration")]
    ConfigMismatch,
    #[error("BadCheckpoint: {0}")]
    BadCheckpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
