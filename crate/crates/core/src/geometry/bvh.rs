//! Bounding volume hierarchy over mesh triangles.
//!
//! Supports exact closest-point queries (ties resolved toward the lowest
//! triangle index) and ray-crossing parity for inside/outside tests.

use super::{GeometryError, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|a| self.min[a] <= other.min[a] && self.max[a] >= other.max[a])
    }

    /// Squared distance from `q` to the box (0 inside).
    pub fn distance_squared(&self, q: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = if q[a] < self.min[a] {
                self.min[a] - q[a]
            } else if q[a] > self.max[a] {
                q[a] - self.max[a]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2
    }

    fn hit_by_ray(&self, origin: &Vec3, inv_dir: &Vec3) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf keeps the interval unchanged.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
        }
        t0 <= t1 * (1.0 + 1e-12) + 1e-12
    }
}

#[derive(Debug, Clone)]
pub enum BvhNode {
    Leaf { bounds: Aabb, first: usize, count: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl BvhNode {
    pub fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub distance: f64,
    pub point: Vec3,
    pub triangle: usize,
}

/// Outcome of casting a ray against all triangles.
enum RayCount {
    Crossings(usize),
    Grazing,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Triangle indices referenced by leaves.
    order: Vec<usize>,
    tris: Vec<[Vec3; 3]>,
}

const MAX_LEAF: usize = 1;

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Self, GeometryError> {
        if mesh.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let tris: Vec<[Vec3; 3]> = (0..mesh.len()).map(|i| mesh.triangle(i)).collect();
        for (i, t) in tris.iter().enumerate() {
            if (t[1] - t[0]).cross(&(t[2] - t[0])).norm() < 1e-14 {
                return Err(GeometryError::DegenerateTriangle(i));
            }
        }
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len());
        build_node(&tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        Ok(Self { nodes, order, tris })
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    /// Triangle indices held by the leaf `node`.
    pub fn leaf_triangles(&self, node: usize) -> &[usize] {
        match &self.nodes[node] {
            BvhNode::Leaf { first, count, .. } => &self.order[*first..*first + *count],
            BvhNode::Inner { .. } => &[],
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn closest_point(&self, q: &Vec3) -> ClosestHit {
        let mut best = ClosestHit {
            distance: f64::INFINITY,
            point: *q,
            triangle: usize::MAX,
        };
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds().distance_squared(q) > best_d2 {
                continue;
            }
            match node {
                BvhNode::Leaf { first, count, .. } => {
                    for &t in &self.order[*first..*first + *count] {
                        let [a, b, c] = &self.tris[t];
                        let p = closest_point_on_triangle(q, a, b, c);
                        let d2 = (p - q).norm_squared();
                        if d2 < best_d2 || (d2 == best_d2 && t < best.triangle) {
                            best_d2 = d2;
                            best = ClosestHit {
                                distance: 0.0,
                                point: p,
                                triangle: t,
                            };
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_squared(q);
                    let dr = self.nodes[*right].bounds().distance_squared(q);
                    // Nearer child is popped first.
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.distance = best_d2.sqrt();
        best
    }

    fn count_crossings(&self, origin: &Vec3, dir: &Vec3) -> RayCount {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut crossings = 0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bounds().hit_by_ray(origin, &inv) {
                continue;
            }
            match node {
                BvhNode::Leaf { first, count, .. } => {
                    for &t in &self.order[*first..*first + *count] {
                        match ray_triangle(origin, dir, &self.tris[t]) {
                            RayHit::Miss => {}
                            RayHit::Hit => crossings += 1,
                            RayHit::Grazing => return RayCount::Grazing,
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        RayCount::Crossings(crossings)
    }
}

/// Ray directions tried in order; the first is +x.
fn ray_direction(attempt: usize) -> Vec3 {
    if attempt == 0 {
        return Vec3::x();
    }
    // Fixed low-discrepancy jitter around +x.
    let phi = 0.618_033_988_749_894_9 * attempt as f64;
    let a = (phi.fract() - 0.5) * 0.6;
    let b = ((phi * 1.324_717_957_244_746).fract() - 0.5) * 0.6;
    Vec3::new(1.0, a + 1e-3 * attempt as f64, b - 7e-4 * attempt as f64).normalize()
}

pub const MAX_SIGN_RETRIES: usize = 8;

/// Inside/outside by ray-crossing parity: `-1` inside the solid, `+1` outside.
pub fn point_sign(mesh: &TriangleMesh, bvh: &Bvh, q: &Vec3) -> Result<i8, GeometryError> {
    mesh.ensure_watertight()?;
    sign_unchecked(bvh, q)
}

/// Parity sign without re-validating watertightness.
pub(crate) fn sign_unchecked(bvh: &Bvh, q: &Vec3) -> Result<i8, GeometryError> {
    for attempt in 0..=MAX_SIGN_RETRIES {
        match bvh.count_crossings(q, &ray_direction(attempt)) {
            RayCount::Crossings(n) => return Ok(if n % 2 == 1 { -1 } else { 1 }),
            RayCount::Grazing => continue,
        }
    }
    Err(GeometryError::SignUndecidable)
}

enum RayHit {
    Miss,
    Hit,
    Grazing,
}

/// Möller–Trumbore with explicit detection of edge, vertex and in-plane hits.
fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> RayHit {
    const EPS: f64 = 1e-10;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm();
    let s = origin - tri[0];
    if det.abs() <= EPS * scale {
        // Parallel: only a problem if the ray lies in the triangle's plane.
        let n = e1.cross(&e2);
        if s.dot(&n).abs() <= EPS * scale * (1.0 + s.norm()) {
            return RayHit::Grazing;
        }
        return RayHit::Miss;
    }
    let inv = 1.0 / det;
    let u = s.dot(&p) * inv;
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) * inv;
    let t = e2.dot(&qv) * inv;
    const BARY_EPS: f64 = 1e-9;
    if u < -BARY_EPS || v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return RayHit::Miss;
    }
    if t < -1e-12 {
        return RayHit::Miss;
    }
    if t <= 1e-12 || u <= BARY_EPS || v <= BARY_EPS || u + v >= 1.0 - BARY_EPS {
        return RayHit::Grazing;
    }
    RayHit::Hit
}

fn build_node(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [usize],
    first: usize,
    count: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let slice = &mut order[first..first + count];
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in slice.iter() {
        for v in &tris[t] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[t]);
    }
    let index = nodes.len();
    if count <= MAX_LEAF {
        nodes.push(BvhNode::Leaf { bounds, first, count });
        return index;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    // Median split on centroid, index as tiebreak so the build is deterministic.
    slice.sort_by(|&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let half = count / 2;
    nodes.push(BvhNode::Leaf { bounds, first, count });
    let left = build_node(tris, centroids, order, first, half, nodes);
    let right = build_node(tris, centroids, order, first + half, count - half, nodes);
    let merged = nodes[left].bounds().union(nodes[right].bounds());
    nodes[index] = BvhNode::Inner {
        bounds: merged,
        left,
        right,
    };
    index
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection §5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
