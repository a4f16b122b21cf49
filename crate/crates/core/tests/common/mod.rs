#![allow(dead_code)]

use std::sync::Arc;

use mdkit::autodiff::{Conv3dShape, Graph, MinMode, Tensor, Var};
use mdkit::body::{Pose, Skeleton, SurfaceSampler};
use mdkit::geometry::{voxelize_sdf, GridSpec, SdfVolume, TriangleMesh, Vec3};
use mdkit::mutual::{fibonacci_basis, per_basis_distance, per_vertex_signed_distance, BasisSet};
use mdkit::nets::{Bound, ParamStore};
use mdkit::training::{loss_motion, MotionLossContext, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

/// Largest relative error (vector-norm based, per input) between the
/// analytic gradient of `sum(f(inputs) ⊙ probe)` and centered differences.
pub fn gradient_error(inputs: &[Tensor], step: f64, f: impl Fn(&mut Graph, &[Var]) -> Var) -> f64 {
    let eval = |ts: &[Tensor]| -> (f64, Option<Vec<Tensor>>) {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.input(t.clone())).collect();
        let out = f(&mut g, &vars);
        let (r, c) = g.shape(out);
        let probe = Tensor::from_fn(r, c, |i, j| ((i * 31 + j * 17) % 13) as f64 / 6.5 - 0.95);
        let loss = g.weighted_sum(out, &probe);
        let value = g.value(loss).data[0];
        let mut grads = g.backward(loss).expect("scalar loss");
        let gs = vars.iter().map(|&v| grads.take(v).unwrap_or_else(|| Tensor::zeros(g.shape(v).0, g.shape(v).1))).collect();
        (value, Some(gs))
    };
    let (_, analytic) = eval(inputs);
    let analytic = analytic.expect("gradients");
    let mut worst: f64 = 0.0;
    for (which, input) in inputs.iter().enumerate() {
        let mut numeric = Tensor::zeros(input.rows, input.cols);
        for e in 0..input.len() {
            let mut plus = inputs.to_vec();
            plus[which].data[e] += step;
            let mut minus = inputs.to_vec();
            minus[which].data[e] -= step;
            numeric.data[e] = (eval(&plus).0 - eval(&minus).0) / (2.0 * step);
        }
        let diff: f64 = analytic[which].data.iter().zip(&numeric.data).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let norm_a: f64 = analytic[which].data.iter().map(|a| a * a).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.data.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = norm_a.max(norm_n);
        let rel = if scale < 1e-12 { diff } else { diff / scale };
        worst = worst.max(rel);
    }
    worst
}

pub fn random_point(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-half..half), rng.gen_range(-half..half), rng.gen_range(-half..half))
}

/// Triangle soup of `count` small random triangles inside `[-1, 1]³`.
pub fn random_soup(rng: &mut ChaCha8Rng, count: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(3 * count);
    let mut triangles = Vec::with_capacity(count);
    for t in 0..count {
        let a = random_point(rng, 1.0);
        vertices.push(a);
        vertices.push(a + random_point(rng, 0.3));
        vertices.push(a + random_point(rng, 0.3));
        let i = 3 * t as u32;
        triangles.push([i, i + 1, i + 2]);
    }
    TriangleMesh::new(vertices, triangles).expect("valid soup")
}

/// Star-shaped closed mesh: an icosphere with radially jittered vertices.
pub fn random_blob(rng: &mut ChaCha8Rng) -> TriangleMesh {
    let center = random_point(rng, 0.2);
    let sphere = TriangleMesh::icosphere(Vec3::zeros(), 1.0, 2).expect("icosphere");
    let vertices = sphere.vertices().iter().map(|v| center + v * rng.gen_range(0.5..0.9)).collect();
    TriangleMesh::new(vertices, sphere.triangles().to_vec()).expect("valid blob")
}

/// Distance from `p` to the segment `ab`.
pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}

/// Point-triangle distance by plane projection with an edge fallback.
pub fn triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let n = (b - a).cross(&(c - a));
    let area2 = n.norm_squared();
    if area2 > 0.0 {
        let height = (p - a).dot(&n) / area2;
        let q = p - n * height;
        let u = (c - b).cross(&(q - b)).dot(&n);
        let v = (a - c).cross(&(q - c)).dot(&n);
        let w = (b - a).cross(&(q - a)).dot(&n);
        if u >= 0.0 && v >= 0.0 && w >= 0.0 {
            return (p - q).norm();
        }
    }
    segment_distance(p, a, b).min(segment_distance(p, b, c)).min(segment_distance(p, c, a))
}

pub fn brute_force_distance(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    (0..mesh.len())
        .map(|t| {
            let [a, b, c] = mesh.triangle(t);
            triangle_distance(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Generalized winding number from summed signed solid angles.
pub fn winding_number(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    let mut total = 0.0;
    for t in 0..mesh.len() {
        let [a, b, c] = mesh.triangle(t);
        let (a, b, c) = (a - p, b - p, c - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * std::f64::consts::PI)
}

/// Distance from the origin-centred box of half-extent `h` (negative inside).
pub fn box_sdf(p: &Vec3, h: f64) -> f64 {
    let q = p.map(|x| x.abs() - h);
    let outside = q.map(|x| x.max(0.0)).norm();
    outside + q.max().min(0.0)
}

/// Thick slab whose top face is the plane z = 0.
pub fn floor_volume() -> Arc<SdfVolume> {
    let slab = TriangleMesh::cuboid(Vec3::new(-6.0, -6.0, -0.5), Vec3::new(6.0, 6.0, 0.0)).expect("slab");
    Arc::new(voxelize_sdf(&slab, GridSpec::new(Vec3::new(-3.0, -3.0, -1.0), 0.125, 48).expect("grid")).expect("voxelize"))
}

/// Default body standing over the floor, slightly posed.
pub fn standing_pose(skeleton: &Skeleton, x: f64) -> Pose {
    let mut pose = Pose::rest(skeleton);
    pose.translation = Vec3::new(x, 0.2, 1.0);
    pose.local[2] = [0.9, 0.3, 0.0, -0.3, 0.9, 0.1];
    pose
}

/// Motion-loss inputs for one sample over `frames` future frames.
pub struct MotionFixture {
    pub skeleton: Skeleton,
    pub basis: BasisSet,
    pub volume: Arc<SdfVolume>,
    pub config: TrainConfig,
}

impl MotionFixture {
    pub fn new() -> Self {
        let config = TrainConfig { min_mode: MinMode::StraightThrough, ..TrainConfig::default() };
        Self {
            skeleton: Skeleton::default_body(),
            basis: fibonacci_basis(150, 2.0).expect("basis").translated(&Vec3::new(0.0, 0.0, 1.0)),
            volume: floor_volume(),
            config,
        }
    }

    /// Exact marker and basis distances of `pose`.
    pub fn distances(&self, pose: &Pose) -> (Vec<f64>, Vec<f64>) {
        let markers = self.skeleton.marker_vertices(pose).expect("markers");
        let sampler = SurfaceSampler::new(&self.skeleton, self.config.surface_density).expect("sampler");
        let surface = sampler.pose(&self.skeleton, pose).expect("surface");
        (per_vertex_signed_distance(&self.volume, &markers), per_basis_distance(&self.basis, &surface.points).expect("basis"))
    }

    /// Components and weighted total of the motion loss for single-sample frames.
    pub fn evaluate(&self, predicted: &[Pose], target: &[Pose], d: &[Vec<f64>], b: &[Vec<f64>]) -> ([f64; 4], f64) {
        let ctx = MotionLossContext::new(&self.skeleton, &self.basis, &self.config).expect("context");
        let mut g = Graph::new();
        let row = |p: &Pose| Tensor::from_vec(1, p.dim(), p.to_vector());
        let pred: Vec<Var> = predicted.iter().map(|p| g.input(row(p))).collect();
        let targ: Vec<Tensor> = target.iter().map(row).collect();
        let table = |rows: &[Vec<f64>]| Tensor::from_vec(rows.len(), rows[0].len(), rows.concat());
        let dt = g.constant(table(d));
        let bt = g.constant(table(b));
        let loss = loss_motion(&mut g, &ctx, &pred, &targ, &[self.volume.clone()], dt, bt).expect("loss");
        let comps = loss.components.map(|c| g.value(c).data[0]);
        (comps, g.value(loss.total).data[0])
    }
}

/// Analytic sphere SDF sampled on an `n³` grid starting at `origin` (all axes).
pub fn toy_sphere_volume(center: Vec3, radius: f64, origin: f64, voxel: f64, n: usize) -> Arc<SdfVolume> {
    let spec = GridSpec::new(Vec3::repeat(origin), voxel, n).expect("grid");
    let mut values = vec![0.0; spec.voxel_count()];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                values[spec.index(i, j, k)] = (spec.voxel_center(i, j, k) - center).norm() - radius;
            }
        }
    }
    Arc::new(SdfVolume::from_values(spec, values).expect("volume"))
}

/// Relative gradient error of every graph primitive on small random inputs.
pub fn primitive_gradient_errors(step: f64) -> Vec<(&'static str, f64)> {
    let mut r = rng(1);
    let mut out = Vec::new();
    let mut check = |name: &'static str, inputs: &[Tensor], f: &dyn Fn(&mut Graph, &[Var]) -> Var| {
        out.push((name, gradient_error(inputs, step, f)));
    };
    let a = random_tensor(&mut r, 3, 4, 1.0);
    let b = random_tensor(&mut r, 4, 2, 1.0);
    let c = random_tensor(&mut r, 3, 4, 1.0);
    let row = random_tensor(&mut r, 1, 4, 1.0);
    check("matmul", &[a.clone(), b], &|g, v| g.matmul(v[0], v[1]));
    check("add", &[a.clone(), c.clone()], &|g, v| g.add(v[0], v[1]));
    check("sub", &[a.clone(), c.clone()], &|g, v| g.sub(v[0], v[1]));
    check("mul", &[a.clone(), c.clone()], &|g, v| g.mul(v[0], v[1]));
    check("add_row", &[a.clone(), row], &|g, v| g.add_row(v[0], v[1]));
    check("scale", &[a.clone()], &|g, v| g.scale(v[0], -1.7));
    check("tanh", &[a.clone()], &|g, v| g.tanh(v[0]));
    check("sigmoid", &[a.clone()], &|g, v| g.sigmoid(v[0]));
    check("relu", &[a.clone()], &|g, v| g.relu(v[0]));
    check("abs", &[a.clone()], &|g, v| g.abs(v[0]));
    check("sum", &[a.clone()], &|g, v| g.sum(v[0]));
    check("mean", &[a.clone()], &|g, v| g.mean(v[0]));
    check("concat_cols", &[a.clone(), c.clone()], &|g, v| g.concat_cols(&[v[0], v[1]]));
    check("slice_cols", &[a.clone()], &|g, v| g.slice_cols(v[0], 1, 3));
    check("concat_rows", &[a.clone(), c.clone()], &|g, v| g.concat_rows(&[v[0], v[1]]));
    check("slice_rows", &[a.clone()], &|g, v| g.slice_rows(v[0], 1, 3));
    check("gather_rows", &[a.clone()], &|g, v| g.gather_rows(v[0], &[2, 0, 2, 1]));
    check("repeat_rows", &[a.clone()], &|g, v| g.repeat_rows(v[0], 3));
    check("reshape", &[a.clone()], &|g, v| g.reshape(v[0], 2, 6));
    let adj = random_tensor(&mut r, 3, 3, 1.0);
    let x = random_tensor(&mut r, 6, 2, 1.0);
    check("block_matmul", &[adj, x], &|g, v| g.block_matmul(v[0], v[1]));

    let shape = Conv3dShape { in_channels: 2, out_channels: 3, size: 5, stride: 2 };
    let vol = random_tensor(&mut r, 2, 2 * 125, 1.0);
    let w = random_tensor(&mut r, 3, 54, 0.3);
    let bias = random_tensor(&mut r, 1, 3, 0.3);
    check("conv3d", &[vol, w, bias], &move |g, v| g.conv3d(v[0], v[1], v[2], shape));
    let y = random_tensor(&mut r, 2, 12, 1.0);
    check("global_avg_pool", &[y], &|g, v| g.global_avg_pool(v[0], 3));

    let skeleton = Arc::new(Skeleton::default_body());
    let mut poses = random_tensor(&mut r, 2, skeleton.pose_dim(), 0.3);
    for row in 0..2 {
        for j in 0..skeleton.joint_count() {
            poses.data[row * skeleton.pose_dim() + 3 + 6 * j] += 1.0;
            poses.data[row * skeleton.pose_dim() + 3 + 6 * j + 4] += 1.0;
        }
    }
    let r6 = random_tensor(&mut r, 3, 6, 1.0);
    check("rot6d_to_matrix", &[r6], &|g, v| g.rot6d_to_matrix(v[0]));
    let s = skeleton.clone();
    check("forward_kinematics", &[poses.clone()], &move |g, v| g.forward_kinematics(v[0], s.clone()));
    let s = skeleton.clone();
    let anchors = Arc::new(skeleton.marker_template());
    check("rigid_points", &[poses], &move |g, v| {
        let fk = g.forward_kinematics(v[0], s.clone());
        g.rigid_points(fk, anchors.clone())
    });

    let volume = toy_sphere_volume(Vec3::new(0.1, -0.2, 0.05), 0.5, -1.0, 0.25, 8);
    let pts = random_tensor(&mut r, 2, 12, 0.7);
    check("sdf_sample", &[pts], &move |g, v| g.sdf_sample(v[0], vec![volume.clone(), volume.clone()]));
    let cloud = random_tensor(&mut r, 2, 15, 0.5);
    let basis = Arc::new(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, -1.2, 0.3), Vec3::new(0.2, 0.2, 1.1)]);
    check("soft_min_distance", &[cloud], &move |g, v| g.soft_min_distance(v[0], basis.clone(), 0.05, 40.0, MinMode::Smooth));
    out
}

/// Largest relative gradient error over the tensors of `store` for the
/// scalar built by `f`, with the name of the worst tensor.
pub fn param_gradient_error(store: &ParamStore, step: f64, f: impl Fn(&mut Graph, &Bound) -> Var) -> (f64, String) {
    let mut g = Graph::new();
    let bound = store.bind(&mut g, |_| true);
    let loss = f(&mut g, &bound);
    let mut grads = g.backward(loss).expect("scalar loss");
    let analytic = bound.gradients(&g, &mut grads);
    let value = |s: &ParamStore| {
        let mut g = Graph::new();
        let bound = s.bind(&mut g, |_| false);
        let loss = f(&mut g, &bound);
        g.value(loss).data[0]
    };
    let mut work = store.clone();
    let mut worst = (0.0, String::new());
    for id in store.ids() {
        let n = store.get(id).len();
        let mut numeric = vec![0.0; n];
        for (e, slot) in numeric.iter_mut().enumerate() {
            let orig = work.get(id).data[e];
            work.get_mut(id).data[e] = orig + step;
            let plus = value(&work);
            work.get_mut(id).data[e] = orig - step;
            let minus = value(&work);
            work.get_mut(id).data[e] = orig;
            *slot = (plus - minus) / (2.0 * step);
        }
        let a = &analytic[id.0].data;
        let diff: f64 = a.iter().zip(&numeric).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(numeric.iter().map(|x| x * x).sum::<f64>().sqrt());
        let rel = if scale < 1e-12 { diff } else { diff / scale };
        if rel > worst.0 || worst.1.is_empty() {
            worst = (rel, store.name(id).to_string());
        }
    }
    worst
}
