//! Differentiable body and scene primitives.

use std::sync::Arc;

use nalgebra::Matrix3;

use super::graph::{op, Graph, Var};
use super::tensor::Tensor;
use crate::body::{AnchoredPoint, Skeleton};
use crate::geometry::{SdfVolume, Vec3};
use crate::mutual::PointTree;

/// Values per joint in the output of [`Graph::forward_kinematics`]: a
/// row-major rotation followed by a position.
pub const FK_STRIDE: usize = 12;

/// How [`Graph::soft_min_distance`] reports its forward value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinMode {
    /// Forward and backward both use the log-sum-exp smooth minimum.
    Smooth,
    /// Forward reports the exact minimum; backward uses the smooth-minimum weights.
    StraightThrough,
}

fn vec3(s: &[f64]) -> Vec3 {
    Vec3::new(s[0], s[1], s[2])
}

/// Gram–Schmidt columns `(b1, b2, b3)` with the norms needed for the backward pass.
fn gram_schmidt(r: &[f64]) -> ([Vec3; 3], f64, f64) {
    let (a1, a2) = (vec3(&r[..3]), vec3(&r[3..6]));
    let n1 = a1.norm();
    let b1 = a1 / n1;
    let u = a2 - b1 * b1.dot(&a2);
    let nu = u.norm();
    let b2 = u / nu;
    ([b1, b2, b1.cross(&b2)], n1, nu)
}

/// Pulls column gradients of a Gram–Schmidt rotation back to the six inputs.
fn gram_schmidt_backward(r: &[f64], g: [Vec3; 3]) -> [f64; 6] {
    let ([b1, b2, _], n1, nu) = gram_schmidt(r);
    let a2 = vec3(&r[3..6]);
    let mut gb1 = g[0] + b2.cross(&g[2]);
    let gb2 = g[1] + g[2].cross(&b1);
    let gu = (gb2 - b2 * b2.dot(&gb2)) / nu;
    let ga2 = gu - b1 * b1.dot(&gu);
    gb1 -= gu * b1.dot(&a2) + a2 * b1.dot(&gu);
    let ga1 = (gb1 - b1 * b1.dot(&gb1)) / n1;
    [ga1.x, ga1.y, ga1.z, ga2.x, ga2.y, ga2.z]
}

fn columns_grad(g: &Matrix3<f64>) -> [Vec3; 3] {
    [g.column(0).into(), g.column(1).into(), g.column(2).into()]
}

fn read_mat(s: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&s[..9])
}

impl Graph {
    /// Batched 6-D rotation decode: `n × 6` to `n × 9` (row-major matrices).
    pub fn rot6d_to_matrix(&mut self, r: Var) -> Var {
        let (n, c) = self.shape(r);
        assert_eq!(c, 6, "rot6d input width");
        let src = self.value(r);
        let mut value = Tensor::zeros(n, 9);
        for i in 0..n {
            let (b, _, _) = gram_schmidt(src.row(i));
            let m = Matrix3::from_columns(&b);
            for (k, v) in value.row_mut(i).iter_mut().enumerate() {
                *v = m[(k / 3, k % 3)];
            }
        }
        self.push(
            value,
            &[r],
            op(move |ctx| {
                let mut g = Tensor::zeros(n, 6);
                for i in 0..n {
                    let gm = read_mat(ctx.grad.row(i));
                    g.row_mut(i).copy_from_slice(&gram_schmidt_backward(ctx.inputs[0].row(i), columns_grad(&gm)));
                }
                vec![Some(g)]
            }),
        )
    }

    /// Batched forward kinematics: pose rows (`n × M`) to per-joint global
    /// rotation and position (`n × 12J`).
    pub fn forward_kinematics(&mut self, poses: Var, skeleton: Arc<Skeleton>) -> Var {
        let (n, m) = self.shape(poses);
        let joints = skeleton.joint_count();
        assert_eq!(m, skeleton.pose_dim(), "pose width");
        let parents: Vec<usize> = skeleton.joints.iter().skip(1).map(|j| j.parent.expect("validated")).collect();
        let offsets = skeleton.offsets();
        let src = self.value(poses);
        let mut value = Tensor::zeros(n, FK_STRIDE * joints);
        for i in 0..n {
            let pose = src.row(i);
            let out = value.row_mut(i);
            let (b, _, _) = gram_schmidt(&pose[3..9]);
            let mut rots = vec![Matrix3::from_columns(&b)];
            let mut pos = vec![vec3(&pose[..3])];
            for j in 1..joints {
                let p = parents[j - 1];
                let (b, _, _) = gram_schmidt(&pose[9 + 6 * (j - 1)..15 + 6 * (j - 1)]);
                pos.push(pos[p] + rots[p] * offsets[j]);
                rots.push(rots[p] * Matrix3::from_columns(&b));
            }
            for j in 0..joints {
                let o = &mut out[j * FK_STRIDE..(j + 1) * FK_STRIDE];
                for k in 0..9 {
                    o[k] = rots[j][(k / 3, k % 3)];
                }
                o[9..12].copy_from_slice(pos[j].as_slice());
            }
        }
        self.push(
            value,
            &[poses],
            op(move |ctx| {
                let (src, out) = (ctx.inputs[0], ctx.output);
                let mut g = Tensor::zeros(n, m);
                for i in 0..n {
                    let pose = src.row(i);
                    let orow = out.row(i);
                    let grow = ctx.grad.row(i);
                    let mut grot: Vec<Matrix3<f64>> = (0..joints).map(|j| read_mat(&grow[j * FK_STRIDE..])).collect();
                    let mut gpos: Vec<Vec3> = (0..joints).map(|j| vec3(&grow[j * FK_STRIDE + 9..])).collect();
                    let gi = g.row_mut(i);
                    for j in (1..joints).rev() {
                        let p = parents[j - 1];
                        let rp = read_mat(&orow[p * FK_STRIDE..]);
                        let r6 = &pose[9 + 6 * (j - 1)..15 + 6 * (j - 1)];
                        let (b, _, _) = gram_schmidt(r6);
                        let local = Matrix3::from_columns(&b);
                        let gl = rp.transpose() * grot[j];
                        let gp_rot = grot[j] * local.transpose() + gpos[j] * offsets[j].transpose();
                        grot[p] += gp_rot;
                        let gpj = gpos[j];
                        gpos[p] += gpj;
                        gi[9 + 6 * (j - 1)..15 + 6 * (j - 1)].copy_from_slice(&gram_schmidt_backward(r6, columns_grad(&gl)));
                    }
                    gi[..3].copy_from_slice(gpos[0].as_slice());
                    let groot = gram_schmidt_backward(&pose[3..9], columns_grad(&grot[0]));
                    gi[3..9].copy_from_slice(&groot);
                }
                vec![Some(g)]
            }),
        )
    }

    /// Points fixed in joint frames, posed by an FK output: `n × 12J` to `n × 3S`.
    pub fn rigid_points(&mut self, fk: Var, anchors: Arc<Vec<AnchoredPoint>>) -> Var {
        let (n, w) = self.shape(fk);
        let s = anchors.len();
        let src = self.value(fk);
        let mut value = Tensor::zeros(n, 3 * s);
        for i in 0..n {
            let row = src.row(i);
            let out = value.row_mut(i);
            for (k, a) in anchors.iter().enumerate() {
                let base = a.joint * FK_STRIDE;
                let p = read_mat(&row[base..]) * a.local + vec3(&row[base + 9..]);
                out[3 * k..3 * k + 3].copy_from_slice(p.as_slice());
            }
        }
        self.push(
            value,
            &[fk],
            op(move |ctx| {
                let mut g = Tensor::zeros(n, w);
                for i in 0..n {
                    let grow = ctx.grad.row(i);
                    let gi = g.row_mut(i);
                    for (k, a) in anchors.iter().enumerate() {
                        let base = a.joint * FK_STRIDE;
                        let gy = vec3(&grow[3 * k..]);
                        for r in 0..3 {
                            for c in 0..3 {
                                gi[base + 3 * r + c] += gy[r] * a.local[c];
                            }
                            gi[base + 9 + r] += gy[r];
                        }
                    }
                }
                vec![Some(g)]
            }),
        )
    }

    /// Trilinear SDF values at `n × 3K` points; row `i` is sampled in `volumes[i]`.
    pub fn sdf_sample(&mut self, points: Var, volumes: Vec<Arc<SdfVolume>>) -> Var {
        let (n, w) = self.shape(points);
        assert_eq!(w % 3, 0, "sdf_sample point width");
        assert_eq!(volumes.len(), n, "one volume per row");
        let k = w / 3;
        let src = self.value(points);
        let mut value = Tensor::zeros(n, k);
        let mut grads = Tensor::zeros(n, w);
        for i in 0..n {
            for j in 0..k {
                let (v, gvec) = volumes[i].sample_with_gradient(&vec3(&src.row(i)[3 * j..]));
                value.set(i, j, v);
                grads.row_mut(i)[3 * j..3 * j + 3].copy_from_slice(gvec.as_slice());
            }
        }
        self.push(
            value,
            &[points],
            op(move |ctx| {
                let data = (0..n * w).map(|e| grads.data[e] * ctx.grad.data[e / 3]).collect();
                vec![Some(Tensor::from_vec(n, w, data))]
            }),
        )
    }

    /// Minimum distance from each fixed basis point to each row's point
    /// cloud (`n × 3S` to `n × P`), smoothed with temperature `tau`.
    /// Candidates farther than `cutoff·tau` beyond the nearest are skipped;
    /// their weight is below `exp(-cutoff)`.
    pub fn soft_min_distance(&mut self, points: Var, basis: Arc<Vec<Vec3>>, tau: f64, cutoff: f64, mode: MinMode) -> Var {
        let (n, w) = self.shape(points);
        assert_eq!(w % 3, 0, "soft_min point width");
        let pcount = basis.len();
        let src = self.value(points);
        let mut value = Tensor::zeros(n, pcount);
        // Sparse Jacobian: for output (i, p), entries offsets[i·P+p]..offsets[i·P+p+1].
        let mut offsets = Vec::with_capacity(n * pcount + 1);
        let mut entries: Vec<(usize, Vec3)> = Vec::new();
        offsets.push(0);
        let mut scratch = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            let cloud: Vec<Vec3> = src.row(i).chunks(3).map(vec3).collect();
            let tree = PointTree::new(&cloud);
            for (p, q) in basis.iter().enumerate() {
                let (dmin, _) = tree.nearest(q).expect("non-empty cloud");
                tree.within(q, dmin + cutoff * tau, &mut scratch);
                weights.clear();
                weights.extend(scratch.iter().map(|&c| {
                    let d = (cloud[c] - q).norm();
                    ((-(d - dmin) / tau).exp(), d)
                }));
                let s: f64 = weights.iter().map(|w| w.0).sum();
                let v = match mode {
                    MinMode::StraightThrough => dmin,
                    MinMode::Smooth => dmin - tau * s.ln(),
                };
                value.set(i, p, v);
                for (&c, &(wt, d)) in scratch.iter().zip(&weights) {
                    if d > 0.0 {
                        entries.push((3 * c, (cloud[c] - q) * (wt / (s * d))));
                    }
                }
                offsets.push(entries.len());
            }
        }
        self.push(
            value,
            &[points],
            op(move |ctx| {
                let mut g = Tensor::zeros(n, w);
                for i in 0..n {
                    let gi = g.row_mut(i);
                    for p in 0..pcount {
                        let go = ctx.grad.get(i, p);
                        if go == 0.0 {
                            continue;
                        }
                        let k = i * pcount + p;
                        for (c, dir) in &entries[offsets[k]..offsets[k + 1]] {
                            for a in 0..3 {
                                gi[c + a] += go * dir[a];
                            }
                        }
                    }
                }
                vec![Some(g)]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{Pose, IDENTITY_6D};

    #[test]
    fn fk_matches_skeleton() {
        let s = Arc::new(Skeleton::default_body());
        let mut pose = Pose::rest(&s);
        pose.translation = Vec3::new(0.3, 0.1, 0.9);
        pose.root = [0.8, 0.6, 0.0, -0.6, 0.8, 0.1];
        pose.local[3] = [1.0, 0.2, 0.0, 0.0, 1.0, 0.5];
        pose.local[7] = IDENTITY_6D;
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_vec(1, 99, pose.to_vector()));
        let fk = g.forward_kinematics(x, s.clone());
        let posed = s.posed(&pose).unwrap();
        let row = g.value(fk).row(0);
        for j in 0..s.joint_count() {
            assert!((vec3(&row[j * 12 + 9..]) - posed.positions[j]).norm() < 1e-12);
            assert!((read_mat(&row[j * 12..]) - posed.rotations[j]).abs().max() < 1e-12);
        }
        let markers = g.rigid_points(fk, Arc::new(s.marker_template()));
        let expected = s.marker_vertices(&pose).unwrap();
        for (k, m) in expected.iter().enumerate() {
            assert!((vec3(&g.value(markers).row(0)[3 * k..]) - m).norm() < 1e-12);
        }
    }

    #[test]
    fn straight_through_reports_hard_min() {
        let mut g = Graph::new();
        let pts = g.input(Tensor::from_vec(1, 6, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0]));
        let basis = Arc::new(vec![Vec3::zeros()]);
        let hard = g.soft_min_distance(pts, basis.clone(), 0.01, 40.0, MinMode::StraightThrough);
        assert_eq!(g.value(hard).data, vec![1.0]);
        let soft = g.soft_min_distance(pts, basis, 0.5, 40.0, MinMode::Smooth);
        let expected = 1.0 - 0.5 * (1.0 + (-2.0f64).exp()).ln();
        assert!((g.value(soft).data[0] - expected).abs() < 1e-14);
    }
}
