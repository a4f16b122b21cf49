use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{loss_dist, loss_motion, MotionLossContext};
use super::synth::{Dataset, Sample, Split};
use super::{ConsistencyTarget, TrainConfig, TrainError};
use crate::autodiff::{Graph, Tensor, Var};
use crate::geometry::SdfVolume;
use crate::nets::{Adam, Bound, DistanceInputs, Features, Model, Variant};

/// Stacked network inputs and targets of a group of samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub size: usize,
    /// `size × N³` crop values (full model only).
    pub scene: Option<Tensor>,
    pub volumes: Vec<Arc<SdfVolume>>,
    /// `T` tensors of `size × M`.
    pub history: Vec<Tensor>,
    /// `U` tensors of `size × M`.
    pub future: Vec<Tensor>,
    /// `(size·K) × T` and `(size·P) × T`.
    pub d_hist: Tensor,
    pub b_hist: Tensor,
    /// `(size·K) × (T+U)` and `(size·P) × (T+U)`.
    pub d_all: Tensor,
    pub b_all: Tensor,
    /// Future frames, `(U·size) × K` and `(U·size) × P`, row `u·size + i`.
    pub d_future: Tensor,
    pub b_future: Tensor,
}

impl Batch {
    pub fn assemble(data: &Dataset, samples: &[&Sample], history: usize, with_scene: bool) -> Result<Self, TrainError> {
        let size = samples.len();
        let first = samples.first().ok_or_else(|| TrainError::EmptySplit("empty batch".into()))?;
        let frames = first.motion.len();
        if history == 0 || history >= frames {
            return Err(TrainError::LengthMismatch { expected: frames, actual: history });
        }
        let horizon = frames - history;
        let (k, p, m) = (first.distances.marker_count(), first.distances.basis_count(), first.motion.pose_dim());
        for s in samples {
            if s.motion.len() != frames || s.distances.len() != frames {
                return Err(TrainError::LengthMismatch { expected: frames, actual: s.motion.len().min(s.distances.len()) });
            }
            if s.distances.marker_count() != k || s.distances.basis_count() != p || s.motion.pose_dim() != m {
                return Err(TrainError::ShapeMismatch("samples disagree in marker, basis or pose counts".into()));
            }
        }
        let volumes: Vec<Arc<SdfVolume>> = samples.iter().map(|s| Arc::new(data.crop(s))).collect();
        let scene = if with_scene {
            let n = volumes[0].values().len();
            let mut t = Tensor::zeros(size, n);
            for (i, v) in volumes.iter().enumerate() {
                if v.values().len() != n {
                    return Err(TrainError::ShapeMismatch("crops differ in resolution".into()));
                }
                t.row_mut(i).copy_from_slice(v.values());
            }
            Some(t)
        } else {
            None
        };
        let poses = |f: usize| {
            let mut t = Tensor::zeros(size, m);
            for (i, s) in samples.iter().enumerate() {
                t.row_mut(i).copy_from_slice(&s.motion.frames[f].to_vector());
            }
            t
        };
        let by_node = |nodes: usize, cols: usize, get: &dyn Fn(&Sample, usize, usize) -> f64| {
            Tensor::from_fn(size * nodes, cols, |r, c| get(samples[r / nodes], r % nodes, c))
        };
        let by_frame = |nodes: usize, get: &dyn Fn(&Sample, usize, usize) -> f64| {
            Tensor::from_fn(horizon * size, nodes, |r, c| get(samples[r % size], c, history + r / size))
        };
        let d = |s: &Sample, node: usize, f: usize| s.distances.d[f][node];
        let b = |s: &Sample, node: usize, f: usize| s.distances.b[f][node];
        Ok(Self {
            size,
            scene,
            volumes,
            history: (0..history).map(poses).collect(),
            future: (history..frames).map(poses).collect(),
            d_hist: by_node(k, history, &d),
            b_hist: by_node(p, history, &b),
            d_all: by_node(k, frames, &d),
            b_all: by_node(p, frames, &b),
            d_future: by_frame(k, &d),
            b_future: by_frame(p, &b),
        })
    }
}

/// Reorders `(size·nodes) × frames` columns `history..` into `(U·size) × nodes`.
fn future_rows(t: &Tensor, size: usize, nodes: usize, history: usize) -> Tensor {
    let horizon = t.cols - history;
    Tensor::from_fn(horizon * size, nodes, |r, c| t.get((r % size) * nodes + c, history + r / size))
}

/// Per-epoch loss summary written as one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u32,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub local: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<f64>,
}

pub struct TrainOutput {
    pub model: Model,
    pub log: Vec<EpochRecord>,
}

/// Loss values of one batch: total, distance term, four motion components.
#[derive(Default, Clone, Copy)]
struct StepLosses {
    total: f64,
    dist: Option<f64>,
    motion: Option<[f64; 4]>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Stage {
    Distance,
    Forecast,
    FineTune,
}

impl Stage {
    fn number(self) -> u32 {
        match self {
            Stage::Distance => 1,
            Stage::Forecast => 2,
            Stage::FineTune => 3,
        }
    }

    fn trains(self, variant: Variant, name: &str) -> bool {
        let encoder = name.starts_with("scene.") || name.starts_with("motion.");
        match (self, variant) {
            (Stage::Distance, _) => encoder || name.starts_with("gd.") || name.starts_with("gb."),
            (Stage::Forecast, Variant::Full) => name.starts_with("forecast."),
            (Stage::Forecast, Variant::MotionOnly) => name.starts_with("forecast.") || encoder,
            (Stage::FineTune, _) => true,
        }
    }
}

/// Encoder outputs of frozen encoders, one row per training sample.
struct FeatureCache {
    scene: Vec<Vec<f64>>,
    motion: Vec<Vec<f64>>,
}

struct Trainer<'a> {
    data: &'a Dataset,
    cfg: &'a TrainConfig,
    loss_ctx: MotionLossContext,
    log: Vec<EpochRecord>,
    log_file: Option<std::fs::File>,
}

impl<'a> Trainer<'a> {
    fn features(&self, g: &mut Graph, model: &Model, p: &Bound, batch: &Batch, idx: &[usize], cache: Option<&FeatureCache>) -> Result<Features, TrainError> {
        if let Some(cache) = cache {
            let stack = |rows: &[Vec<f64>]| {
                let w = rows[idx[0]].len();
                Tensor::from_fn(idx.len(), w, |r, c| rows[idx[r]][c])
            };
            let scene = g.constant(stack(&cache.scene));
            let motion = g.constant(stack(&cache.motion));
            return Ok(Features { scene: Some(scene), motion });
        }
        Ok(model.encode(g, p, batch.scene.as_ref(), &batch.history)?)
    }

    fn step(&self, g: &mut Graph, model: &Model, p: &Bound, stage: Stage, batch: &Batch, idx: &[usize], cache: Option<&FeatureCache>) -> Result<(Var, StepLosses), TrainError> {
        let cfg = &model.config;
        let f = self.features(g, model, p, batch, idx, cache)?;
        let full = model.is_full();
        let mut losses = StepLosses::default();
        let mut dist_loss = None;
        let mut predicted = None;
        if full && (stage != Stage::Forecast || !self.cfg.teacher_forcing) {
            let (d_hat, b_hat) = model.predict_distances(g, p, &f, &batch.d_hist, &batch.b_hist)?;
            if stage != Stage::Forecast {
                let d = g.constant(batch.d_all.clone());
                let b = g.constant(batch.b_all.clone());
                let l = loss_dist(g, d_hat, b_hat, d, b)?;
                losses.dist = Some(g.value(l).data[0]);
                dist_loss = Some(l);
            }
            predicted = Some((d_hat, b_hat));
        }
        if stage == Stage::Distance {
            let l = dist_loss.expect("distance stage needs the full model");
            losses.total = g.value(l).data[0];
            return Ok((l, losses));
        }
        let distances = if full {
            Some(match (stage, predicted) {
                (Stage::FineTune, Some((d, b))) => DistanceInputs { d, b },
                (Stage::Forecast, Some((d, b))) => {
                    let d = g.constant(g.value(d).clone());
                    let b = g.constant(g.value(b).clone());
                    DistanceInputs { d, b }
                }
                _ => DistanceInputs { d: g.constant(batch.d_all.clone()), b: g.constant(batch.b_all.clone()) },
            })
        } else {
            None
        };
        let last = batch.history.last().expect("non-empty history");
        let poses = model.forecast(g, p, &f, last, distances)?;
        let (d_target, b_target) = match (self.cfg.consistency_target, predicted) {
            (ConsistencyTarget::Predicted, Some((d, b))) => (
                future_rows(g.value(d), batch.size, cfg.markers, cfg.history),
                future_rows(g.value(b), batch.size, cfg.basis, cfg.history),
            ),
            _ => (batch.d_future.clone(), batch.b_future.clone()),
        };
        let d_target = g.constant(d_target);
        let b_target = g.constant(b_target);
        let motion = loss_motion(g, &self.loss_ctx, &poses, &batch.future, &batch.volumes, d_target, b_target)?;
        losses.motion = Some(motion.components.map(|c| g.value(c).data[0]));
        let total = match dist_loss {
            Some(l) => g.add(l, motion.total),
            None => motion.total,
        };
        losses.total = g.value(total).data[0];
        Ok((total, losses))
    }

    fn run_stage(&mut self, model: &mut Model, stage: Stage, epochs: usize, epoch_offset: usize, train: &[&Sample], cache: Option<&FeatureCache>) -> Result<(), TrainError> {
        if epochs == 0 {
            return Ok(());
        }
        let variant = model.config.variant;
        let trainable = |name: &str| stage.trains(variant, name);
        let mut adam = Adam::new(&model.params);
        let with_scene = model.is_full() && cache.is_none();
        for epoch in 1..=epochs {
            let lr = self.cfg.lr_at(epoch_offset + epoch);
            let mut order: Vec<usize> = (0..train.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(((stage.number() as u64) << 32) | (epoch_offset + epoch) as u64);
            order.shuffle(&mut rng);
            let mut sums = (0.0, 0.0, [0.0; 4]);
            for (bi, idx) in order.chunks(self.cfg.batch_size).enumerate() {
                let samples: Vec<&Sample> = idx.iter().map(|&i| train[i]).collect();
                let batch = Batch::assemble(self.data, &samples, model.config.history, with_scene)?;
                let mut g = Graph::new();
                let p = model.params.bind(&mut g, trainable);
                let (loss, values) = self.step(&mut g, model, &p, stage, &batch, idx, cache)?;
                let finite = values.total.is_finite() && values.motion.map_or(true, |m| m.iter().all(|v| v.is_finite()));
                if !finite {
                    return Err(TrainError::NonFiniteLoss {
                        stage: stage.number(),
                        epoch: epoch_offset + epoch,
                        batch: bi,
                        detail: format!("total {} dist {:?} motion {:?}", values.total, values.dist, values.motion),
                    });
                }
                let mut grads = g.backward(loss)?;
                let grads = p.gradients(&g, &mut grads);
                adam.step(&mut model.params, &grads, lr, trainable);
                let w = idx.len() as f64;
                sums.0 += w * values.total;
                sums.1 += w * values.dist.unwrap_or(0.0);
                for (s, v) in sums.2.iter_mut().zip(values.motion.unwrap_or([0.0; 4])) {
                    *s += w * v;
                }
            }
            let n = train.len() as f64;
            let has_motion = stage != Stage::Distance;
            let has_dist = model.is_full() && stage != Stage::Forecast;
            let record = EpochRecord {
                stage: stage.number(),
                epoch: epoch_offset + epoch,
                lr,
                loss: sums.0 / n,
                dist: has_dist.then_some(sums.1 / n),
                global: has_motion.then_some(sums.2[0] / n),
                local: has_motion.then_some(sums.2[1] / n),
                vertex: has_motion.then_some(sums.2[2] / n),
                basis: has_motion.then_some(sums.2[3] / n),
            };
            log::info!("stage {} epoch {} loss {:.6}", record.stage, record.epoch, record.loss);
            if let Some(f) = self.log_file.as_mut() {
                writeln!(f, "{}", serde_json::to_string(&record)?)?;
                f.flush()?;
            }
            self.log.push(record);
        }
        Ok(())
    }

    fn cache_features(&self, model: &Model, train: &[&Sample]) -> Result<FeatureCache, TrainError> {
        let mut cache = FeatureCache { scene: Vec::with_capacity(train.len()), motion: Vec::with_capacity(train.len()) };
        for chunk in train.chunks(self.cfg.batch_size) {
            let batch = Batch::assemble(self.data, chunk, model.config.history, true)?;
            let mut g = Graph::new();
            let p = model.params.bind(&mut g, |_| false);
            let f = model.encode(&mut g, &p, batch.scene.as_ref(), &batch.history)?;
            let scene = g.value(f.scene.expect("full model")).clone();
            let motion = g.value(f.motion).clone();
            for i in 0..chunk.len() {
                cache.scene.push(scene.row(i).to_vec());
                cache.motion.push(motion.row(i).to_vec());
            }
        }
        Ok(cache)
    }
}

/// Stage 1 fits the distance predictor, stage 2 the forecaster on frozen
/// encoder features, stage 3 fine-tunes everything end to end. With `out`
/// set, writes `distance.mdck`, `forecaster.mdck`, `fused.mdck`,
/// `train_config.json` and `log.jsonl` there.
pub fn train_stagewise(data: &Dataset, cfg: &TrainConfig, out: Option<&Path>) -> Result<TrainOutput, TrainError> {
    cfg.validate()?;
    let mc = &cfg.model;
    let sc = &data.config;
    if mc.history != sc.history || mc.horizon != sc.horizon || mc.basis != sc.basis_count || mc.markers != data.skeleton.marker_count() || mc.pose_dim != data.skeleton.pose_dim() {
        return Err(TrainError::InvalidConfig("model dimensions do not match the dataset".into()));
    }
    if mc.variant == Variant::Full && mc.grid != sc.crop_resolution() {
        return Err(TrainError::InvalidConfig(format!("model grid {} but crops are {}", mc.grid, sc.crop_resolution())));
    }
    let train = data.split(Split::Train);
    if train.is_empty() {
        return Err(TrainError::EmptySplit(Split::Train.name().into()));
    }
    let log_file = match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("train_config.json"), cfg.to_json())?;
            Some(std::fs::File::create(dir.join("log.jsonl"))?)
        }
        None => None,
    };
    let mut trainer = Trainer { data, cfg, loss_ctx: MotionLossContext::new(&data.skeleton, &data.basis, cfg)?, log: Vec::new(), log_file };
    let mut model = Model::new(mc.clone(), cfg.seed)?;
    let save = |model: &Model, name: &str| -> Result<(), TrainError> {
        if let Some(dir) = out {
            model.save(&dir.join(name))?;
        }
        Ok(())
    };
    if model.is_full() {
        trainer.run_stage(&mut model, Stage::Distance, cfg.stage1_epochs, 0, &train, None)?;
    }
    save(&model, "distance.mdck")?;
    let cache = if model.is_full() { Some(trainer.cache_features(&model, &train)?) } else { None };
    trainer.run_stage(&mut model, Stage::Forecast, cfg.stage2_epochs, 0, &train, cache.as_ref())?;
    drop(cache);
    save(&model, "forecaster.mdck")?;
    trainer.run_stage(&mut model, Stage::FineTune, cfg.finetune_epochs, cfg.stage2_epochs, &train, None)?;
    save(&model, "fused.mdck")?;
    Ok(TrainOutput { model, log: trainer.log })
}
