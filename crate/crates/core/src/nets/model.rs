use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layers::{GcnStack, Gru, Linear};
use super::params::{Bound, ParamStore};
use super::NetError;
use crate::autodiff::{Conv3dShape, Graph, Tensor, Var};
use crate::spectral::DctBasis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Distance predictors plus a forecaster fed scene, motion and distances.
    Full,
    /// Forecaster fed past motion only.
    MotionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub markers: usize,
    pub basis: usize,
    pub history: usize,
    pub horizon: usize,
    pub pose_dim: usize,
    pub grid: usize,
    pub gcn_hidden: usize,
    pub gcn_blocks: usize,
    pub scene_channels: Vec<usize>,
    pub scene_feature: usize,
    pub motion_hidden: usize,
    pub forecast_hidden: usize,
    pub adjacency_noise: f64,
    /// Init scale of the layers whose outputs are added as residuals.
    pub residual_init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Full,
            markers: 67,
            basis: 150,
            history: 15,
            horizon: 30,
            pose_dim: 99,
            grid: 64,
            gcn_hidden: 64,
            gcn_blocks: 4,
            scene_channels: vec![8, 16, 32],
            scene_feature: 64,
            motion_hidden: 128,
            forecast_hidden: 256,
            adjacency_noise: 1e-3,
            residual_init_scale: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn frames(&self) -> usize {
        self.history + self.horizon
    }

    pub fn digest(&self) -> [u8; 32] {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).into()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let positive = [self.markers, self.basis, self.history, self.pose_dim, self.gcn_hidden, self.motion_hidden, self.forecast_hidden];
        if positive.contains(&0) || self.horizon == 0 {
            return Err(NetError::InvalidConfig("sizes must be positive".into()));
        }
        if self.pose_dim < 9 || (self.pose_dim - 9) % 6 != 0 {
            return Err(NetError::InvalidConfig(format!("pose dimension {} is not 9 + 6n", self.pose_dim)));
        }
        if self.variant == Variant::Full {
            if self.scene_channels.is_empty() {
                return Err(NetError::InvalidConfig("scene encoder needs at least one stage".into()));
            }
            if self.grid >> self.scene_channels.len() == 0 {
                return Err(NetError::InvalidConfig("grid too small for the scene encoder".into()));
            }
        }
        Ok(())
    }
}

/// Strided 3-D CNN, global average pooling, and a `tanh` projection.
#[derive(Debug, Clone)]
pub struct SceneEncoder {
    convs: Vec<(super::params::ParamId, super::params::ParamId, Conv3dShape)>,
    project: Linear,
    pub grid: usize,
}

impl SceneEncoder {
    fn new(store: &mut ParamStore, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut convs = Vec::new();
        let (mut size, mut channels) = (cfg.grid, 1);
        for (i, &out) in cfg.scene_channels.iter().enumerate() {
            let shape = Conv3dShape { in_channels: channels, out_channels: out, size, stride: 2 };
            let (r, c) = shape.weight_shape();
            let w = store.uniform(&format!("scene.conv{i}.w"), r, c, c, 1.0, rng);
            let b = store.zeros(&format!("scene.conv{i}.b"), 1, out);
            convs.push((w, b, shape));
            size = shape.out_size();
            channels = out;
        }
        let project = Linear::new(store, "scene.project", channels, cfg.scene_feature, 1.0, rng);
        Self { convs, project, grid: cfg.grid }
    }

    /// `volumes` holds one flattened `grid³` SDF per row.
    pub fn forward(&self, g: &mut Graph, p: &Bound, volumes: Var) -> Var {
        let mut x = volumes;
        for &(w, b, shape) in &self.convs {
            x = g.conv3d(x, p.var(w), p.var(b), shape);
            x = g.relu(x);
        }
        let channels = self.convs.last().map_or(1, |c| c.2.out_channels);
        let pooled = g.global_avg_pool(x, channels);
        let y = self.project.forward(g, p, pooled);
        g.tanh(y)
    }
}

/// Recurrent encoder over observed poses; the feature is the final hidden state.
#[derive(Debug, Clone)]
pub struct MotionEncoder {
    pub gru: Gru,
}

impl MotionEncoder {
    pub fn forward(&self, g: &mut Graph, frames: &[Var], p: &Bound) -> Result<Var, NetError> {
        let first = frames.first().ok_or(NetError::EmptyHistory)?;
        let batch = g.shape(*first).0;
        let mut h = g.constant(Tensor::zeros(batch, self.gru.hidden));
        for &x in frames {
            h = self.gru.step(g, p, x, h);
        }
        Ok(h)
    }
}

/// Autoregressive pose forecaster with a residual pose head.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub init: Linear,
    pub gru: Gru,
    pub head: Linear,
}

/// Encoded context shared by the predictors and the forecaster.
#[derive(Debug, Clone, Copy)]
pub struct Features {
    pub scene: Option<Var>,
    pub motion: Var,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub scene: Option<SceneEncoder>,
    pub motion: MotionEncoder,
    pub gd: Option<GcnStack>,
    pub gb: Option<GcnStack>,
    pub forecaster: Forecaster,
}

/// Future distance inputs for the forecaster, as full `T+U` sequences.
#[derive(Debug, Clone, Copy)]
pub struct DistanceInputs {
    /// `(batch·K) × (T+U)`.
    pub d: Var,
    /// `(batch·P) × (T+U)`.
    pub b: Var,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let full = config.variant == Variant::Full;
        let frames = config.frames();
        let scene = full.then(|| SceneEncoder::new(&mut store, &config, &mut rng));
        let motion = MotionEncoder { gru: Gru::new(&mut store, "motion.gru", config.pose_dim, config.motion_hidden, &mut rng) };
        let context = if full { config.scene_feature + config.motion_hidden } else { config.motion_hidden };
        let (gd, gb) = if full {
            let stack = |store: &mut ParamStore, name: &str, nodes: usize, rng: &mut ChaCha8Rng| {
                GcnStack::new(
                    store,
                    name,
                    nodes,
                    frames + context,
                    config.gcn_hidden,
                    frames,
                    config.gcn_blocks,
                    config.residual_init_scale,
                    config.adjacency_noise,
                    rng,
                )
            };
            (Some(stack(&mut store, "gd", config.markers, &mut rng)), Some(stack(&mut store, "gb", config.basis, &mut rng)))
        } else {
            (None, None)
        };
        let step_inputs = config.pose_dim + context + if full { config.markers + config.basis } else { 0 };
        let forecaster = Forecaster {
            init: Linear::new(&mut store, "forecast.init", context, config.forecast_hidden, 1.0, &mut rng),
            gru: Gru::new(&mut store, "forecast.gru", step_inputs, config.forecast_hidden, &mut rng),
            head: Linear::new(&mut store, "forecast.head", config.forecast_hidden, config.pose_dim, config.residual_init_scale, &mut rng),
        };
        Ok(Self { config, params: store, scene, motion, gd, gb, forecaster })
    }

    pub fn is_full(&self) -> bool {
        self.config.variant == Variant::Full
    }

    /// Scene (if any) and motion features. `scene` is `batch × grid³`; `history` holds `T` tensors of `batch × M`.
    pub fn encode(&self, g: &mut Graph, p: &Bound, scene: Option<&Tensor>, history: &[Tensor]) -> Result<Features, NetError> {
        let batch = history.first().ok_or(NetError::EmptyHistory)?.rows;
        for h in history {
            expect_shape("history pose", h.shape(), (batch, self.config.pose_dim))?;
        }
        let scene = match (&self.scene, scene) {
            (Some(enc), Some(s)) => {
                expect_shape("scene volume", s.shape(), (batch, self.config.grid.pow(3)))?;
                let v = g.constant(s.clone());
                Some(enc.forward(g, p, v))
            }
            (Some(_), None) => return Err(NetError::ShapeMismatch("full model needs a scene volume".into())),
            (None, _) => None,
        };
        let frames: Vec<Var> = history.iter().map(|h| g.constant(h.clone())).collect();
        let motion = self.motion.forward(g, &frames, p)?;
        Ok(Features { scene, motion })
    }

    fn context(&self, g: &mut Graph, f: &Features) -> Var {
        match f.scene {
            Some(s) => g.concat_cols(&[s, f.motion]),
            None => f.motion,
        }
    }

    /// Predicted marker and basis distances over all `T+U` frames from
    /// observed `(batch·K) × T` and `(batch·P) × T` histories.
    pub fn predict_distances(&self, g: &mut Graph, p: &Bound, f: &Features, d_hist: &Tensor, b_hist: &Tensor) -> Result<(Var, Var), NetError> {
        let (gd, gb) = match (&self.gd, &self.gb) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(NetError::NoDistancePredictor),
        };
        let batch = g.shape(f.motion).0;
        let cfg = &self.config;
        expect_shape("marker history", d_hist.shape(), (batch * cfg.markers, cfg.history))?;
        expect_shape("basis history", b_hist.shape(), (batch * cfg.basis, cfg.history))?;
        let basis = DctBasis::cached(cfg.frames()).expect("positive length");
        let c = Tensor::from_vec(cfg.frames(), cfg.frames(), basis.matrix().to_vec());
        let ct = c.transpose();
        let context = self.context(g, f);
        let c_var = g.constant(c);
        let mut branch = |stack: &GcnStack, hist: &Tensor, nodes: usize| {
            let coeffs = padded_coefficients(hist, cfg.horizon, &ct);
            let h = g.constant(coeffs);
            let ctx = g.repeat_rows(context, nodes);
            let x = g.concat_cols(&[h, ctx]);
            let residual = stack.forward(g, p, x);
            let sum = g.add(residual, h);
            g.matmul(sum, c_var)
        };
        let d = branch(gd, d_hist, cfg.markers);
        let b = branch(gb, b_hist, cfg.basis);
        Ok((d, b))
    }

    /// `U` predicted poses (`batch × M` each), starting from `last` (`batch × M`).
    pub fn forecast(&self, g: &mut Graph, p: &Bound, f: &Features, last: &Tensor, distances: Option<DistanceInputs>) -> Result<Vec<Var>, NetError> {
        let cfg = &self.config;
        let batch = g.shape(f.motion).0;
        expect_shape("last pose", last.shape(), (batch, cfg.pose_dim))?;
        let columns = match (self.is_full(), distances) {
            (true, Some(dist)) => {
                expect_shape("marker distances", g.shape(dist.d), (batch * cfg.markers, cfg.frames()))?;
                expect_shape("basis distances", g.shape(dist.b), (batch * cfg.basis, cfg.frames()))?;
                Some(dist)
            }
            (true, None) => return Err(NetError::ShapeMismatch("full model needs distance inputs".into())),
            (false, _) => None,
        };
        let context = self.context(g, f);
        let h0 = self.forecaster.init.forward(g, p, context);
        let mut h = g.tanh(h0);
        let mut prev = g.constant(last.clone());
        let mut out = Vec::with_capacity(cfg.horizon);
        for u in 0..cfg.horizon {
            let frame = cfg.history + u;
            let x = match columns {
                Some(dist) => {
                    let d = g.slice_cols(dist.d, frame, frame + 1);
                    let d = g.reshape(d, batch, cfg.markers);
                    let b = g.slice_cols(dist.b, frame, frame + 1);
                    let b = g.reshape(b, batch, cfg.basis);
                    g.concat_cols(&[prev, d, b, context])
                }
                None => g.concat_cols(&[prev, context]),
            };
            h = self.forecaster.gru.step(g, p, x, h);
            let delta = self.forecaster.head.forward(g, p, h);
            prev = g.add(prev, delta);
            out.push(prev);
        }
        Ok(out)
    }

    /// Zeroes the output layers of both distance predictors.
    pub fn zero_distance_heads(&mut self) {
        for stack in [&self.gd, &self.gb].into_iter().flatten() {
            let w = stack.output.w;
            self.params.get_mut(w).data.fill(0.0);
        }
    }

    pub fn zero_pose_head(&mut self) {
        let (w, b) = (self.forecaster.head.w, self.forecaster.head.b);
        self.params.get_mut(w).data.fill(0.0);
        self.params.get_mut(b).data.fill(0.0);
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), NetError> {
        let mut buf = Vec::new();
        self.params.write_to(&mut buf, &self.config.digest())?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Loads parameters saved by a model with the same configuration.
    pub fn load(config: ModelConfig, path: &std::path::Path) -> Result<Self, NetError> {
        let mut model = Self::new(config, 0)?;
        let (store, digest) = ParamStore::read_from(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if digest != model.config.digest() {
            return Err(NetError::ConfigMismatch);
        }
        model.params.load_matching(&store)?;
        Ok(model)
    }
}

/// DCT coefficients of a history padded to `T+U` frames, row by row: `pad(hist)·Cᵀ`.
pub fn padded_coefficients(hist: &Tensor, horizon: usize, ct: &Tensor) -> Tensor {
    let t = hist.cols;
    let padded = Tensor::from_fn(hist.rows, t + horizon, |r, c| hist.get(r, c.min(t - 1)));
    padded.matmul(ct)
}

fn expect_shape(what: &str, got: (usize, usize), want: (usize, usize)) -> Result<(), NetError> {
    if got != want {
        return Err(NetError::ShapeMismatch(format!("{what}: expected {}x{}, got {}x{}", want.0, want.1, got.0, got.1)));
    }
    Ok(())
}
