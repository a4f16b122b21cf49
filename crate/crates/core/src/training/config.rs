use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::autodiff::MinMode;
use crate::nets::{ModelConfig, Variant};

/// Weights of the global, local, vertex-consistency and basis-consistency terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub global: f64,
    pub local: f64,
    pub vertex: f64,
    pub basis: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { global: 1.0, local: 0.5, vertex: 1.0, basis: 1.0 }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.global, self.local, self.vertex, self.basis]
    }

    pub fn combine(&self, components: &[f64; 4]) -> f64 {
        self.as_array().iter().zip(components).map(|(w, c)| w * c).sum()
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.as_array().iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(TrainError::InvalidConfig("loss weights must be finite and nonnegative".into()))
        }
    }
}

/// Which distances the consistency losses compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyTarget {
    GroundTruth,
    Predicted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub stage1_epochs: usize,
    pub stage2_epochs: usize,
    pub finetune_epochs: usize,
    pub lr: f64,
    /// 1-based epoch from which the rate is halved. Fine-tune epochs continue
    /// the count after stage 2.
    pub decay_epoch: usize,
    pub batch_size: usize,
    pub weights: LossWeights,
    /// Smooth-min temperature in meters.
    pub tau: f64,
    pub min_mode: MinMode,
    /// Surface points farther than `cutoff·tau` beyond the nearest one are ignored by the smooth-min.
    pub softmin_cutoff: f64,
    pub surface_density: f64,
    /// Feed ground-truth distances to the forecaster in stage 2.
    pub teacher_forcing: bool,
    pub consistency_target: ConsistencyTarget,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stage1_epochs: 40,
            stage2_epochs: 40,
            finetune_epochs: 1,
            lr: 5e-4,
            decay_epoch: 30,
            batch_size: 16,
            weights: LossWeights::default(),
            tau: 0.01,
            min_mode: MinMode::StraightThrough,
            softmin_cutoff: 8.0,
            surface_density: crate::body::DEFAULT_SURFACE_DENSITY,
            teacher_forcing: true,
            consistency_target: ConsistencyTarget::GroundTruth,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Learning rate at 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch >= self.decay_epoch {
            0.5 * self.lr
        } else {
            self.lr
        }
    }

    /// Weights in effect for the configured variant; the motion-only model has no scene to be consistent with.
    pub fn effective_weights(&self) -> LossWeights {
        match self.model.variant {
            Variant::Full => self.weights,
            Variant::MotionOnly => LossWeights { vertex: 0.0, basis: 0.0, ..self.weights },
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.model.validate()?;
        self.weights.validate()?;
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(TrainError::InvalidConfig("lr must be positive".into()));
        }
        if !(self.tau > 0.0 && self.softmin_cutoff > 0.0 && self.surface_density > 0.0) {
            return Err(TrainError::InvalidConfig("tau, softmin_cutoff and surface_density must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
