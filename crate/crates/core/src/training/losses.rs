use std::sync::Arc;

use super::{LossWeights, TrainConfig, TrainError};
use crate::autodiff::{Graph, MinMode, Tensor, Var};
use crate::body::{AnchoredPoint, Skeleton, SurfaceSampler};
use crate::geometry::{SdfVolume, Vec3};
use crate::mutual::BasisSet;

fn same_shape(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<(), TrainError> {
    if a == b {
        Ok(())
    } else {
        Err(TrainError::ShapeMismatch(format!("{what}: {}x{} vs {}x{}", a.0, a.1, b.0, b.1)))
    }
}

/// Mean absolute marker-distance error plus mean absolute basis-distance error.
/// Rows are markers (or basis points) of every batch item, columns are frames.
pub fn loss_dist(g: &mut Graph, d_hat: Var, b_hat: Var, d: Var, b: Var) -> Result<Var, TrainError> {
    same_shape("marker distances", g.shape(d_hat), g.shape(d))?;
    same_shape("basis distances", g.shape(b_hat), g.shape(b))?;
    let dd = g.sub(d_hat, d);
    let dd = g.abs(dd);
    let ld = g.mean(dd);
    let db = g.sub(b_hat, b);
    let db = g.abs(db);
    let lb = g.mean(db);
    Ok(g.add(ld, lb))
}

/// Plain-loop distance loss of one sequence; inputs are `K × L` and `P × L`.
pub fn loss_dist_reference(d_hat: &[Vec<f64>], b_hat: &[Vec<f64>], d: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, TrainError> {
    let check = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Result<(usize, usize), TrainError> {
        let cols = x.first().map_or(0, Vec::len);
        if x.len() != y.len() || x.iter().chain(y).any(|r| r.len() != cols) || x.is_empty() || cols == 0 {
            return Err(TrainError::ShapeMismatch("distance tables differ in shape".into()));
        }
        Ok((x.len(), cols))
    };
    let (k, l) = check(d_hat, d)?;
    let (p, l2) = check(b_hat, b)?;
    if l != l2 {
        return Err(TrainError::ShapeMismatch("marker and basis tables cover different frame counts".into()));
    }
    let mut sd = 0.0;
    for (x, y) in d_hat.iter().zip(d) {
        for (a, c) in x.iter().zip(y) {
            sd += (a - c).abs();
        }
    }
    let mut sb = 0.0;
    for (x, y) in b_hat.iter().zip(b) {
        for (a, c) in x.iter().zip(y) {
            sb += (a - c).abs();
        }
    }
    Ok((sd / k as f64 + sb / p as f64) / l as f64)
}

/// Fixed inputs of the motion loss shared by every batch.
#[derive(Debug, Clone)]
pub struct MotionLossContext {
    pub skeleton: Arc<Skeleton>,
    pub markers: Arc<Vec<AnchoredPoint>>,
    pub surface: Arc<Vec<AnchoredPoint>>,
    pub basis: Arc<Vec<Vec3>>,
    pub weights: LossWeights,
    pub tau: f64,
    pub cutoff: f64,
    pub mode: MinMode,
}

impl MotionLossContext {
    pub fn new(skeleton: &Skeleton, basis: &BasisSet, cfg: &TrainConfig) -> Result<Self, TrainError> {
        let sampler = SurfaceSampler::new(skeleton, cfg.surface_density)?;
        Ok(Self {
            skeleton: Arc::new(skeleton.clone()),
            markers: Arc::new(skeleton.marker_template()),
            surface: Arc::new(sampler.anchors().cloned().collect()),
            basis: Arc::new(basis.points.clone()),
            weights: cfg.effective_weights(),
            tau: cfg.tau,
            cutoff: cfg.softmin_cutoff,
            mode: cfg.min_mode,
        })
    }
}

/// Weighted total and the global, local, vertex and basis components.
#[derive(Debug, Clone, Copy)]
pub struct MotionLoss {
    pub total: Var,
    pub components: [Var; 4],
}

/// Motion loss over `U` predicted frames of a batch.
///
/// `predicted[u]` and `target[u]` are `batch × M`; `volumes[i]` is the scene
/// of batch item `i`; `d_target` / `b_target` are `(U·batch) × K` / `× P`
/// with row `u·batch + i`. Components whose weight is zero are still
/// evaluated but stay out of the differentiated total.
pub fn loss_motion(
    g: &mut Graph,
    ctx: &MotionLossContext,
    predicted: &[Var],
    target: &[Tensor],
    volumes: &[Arc<SdfVolume>],
    d_target: Var,
    b_target: Var,
) -> Result<MotionLoss, TrainError> {
    if predicted.len() != target.len() || predicted.is_empty() {
        return Err(TrainError::LengthMismatch { expected: target.len(), actual: predicted.len() });
    }
    let (batch, m) = g.shape(predicted[0]);
    for (&p, t) in predicted.iter().zip(target) {
        same_shape("pose", g.shape(p), (batch, m))?;
        same_shape("pose", t.shape(), (batch, m))?;
    }
    if m != ctx.skeleton.pose_dim() {
        return Err(TrainError::ShapeMismatch(format!("pose width {m} vs skeleton {}", ctx.skeleton.pose_dim())));
    }
    if volumes.len() != batch {
        return Err(TrainError::ShapeMismatch(format!("{} volumes for batch of {batch}", volumes.len())));
    }
    let rows = predicted.len() * batch;
    same_shape("vertex targets", g.shape(d_target), (rows, ctx.markers.len()))?;
    same_shape("basis targets", g.shape(b_target), (rows, ctx.basis.len()))?;

    let y_hat = g.concat_rows(predicted);
    let mut stacked = Tensor::zeros(rows, m);
    for (u, t) in target.iter().enumerate() {
        stacked.data[u * batch * m..(u + 1) * batch * m].copy_from_slice(&t.data);
    }
    let y = g.constant(stacked);
    let diff = g.sub(y_hat, y);
    let diff = g.abs(diff);
    let per_frame = 1.0 / rows as f64;
    let global = g.slice_cols(diff, 0, 9);
    let global = g.sum(global);
    let global = g.scale(global, per_frame);
    let local = g.slice_cols(diff, 9, m);
    let local = g.sum(local);
    let local = g.scale(local, per_frame);

    let fk = g.forward_kinematics(y_hat, ctx.skeleton.clone());
    let markers = g.rigid_points(fk, ctx.markers.clone());
    let row_volumes = (0..rows).map(|r| volumes[r % batch].clone()).collect();
    let d_tilde = g.sdf_sample(markers, row_volumes);
    let vertex = g.sub(d_tilde, d_target);
    let vertex = g.abs(vertex);
    let vertex = g.mean(vertex);

    let surface = g.rigid_points(fk, ctx.surface.clone());
    let b_tilde = g.soft_min_distance(surface, ctx.basis.clone(), ctx.tau, ctx.cutoff, ctx.mode);
    let basis = g.sub(b_tilde, b_target);
    let basis = g.abs(basis);
    let basis = g.mean(basis);

    let components = [global, local, vertex, basis];
    let mut total: Option<Var> = None;
    for (c, w) in components.iter().zip(ctx.weights.as_array()) {
        if w == 0.0 {
            continue;
        }
        let term = g.scale(*c, w);
        total = Some(match total {
            Some(t) => g.add(t, term),
            None => term,
        });
    }
    let total = match total {
        Some(t) => t,
        None => g.constant(Tensor::scalar(0.0)),
    };
    Ok(MotionLoss { total, components })
}
