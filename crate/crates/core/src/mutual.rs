//! Human/scene mutual distances: signed marker distances to the scene and
//! basis-point distances to the body surface.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::body::{fibonacci_directions, BodyError, MotionSequence, Skeleton, SurfaceSampler};
use crate::geometry::{SdfVolume, Vec3};

pub const DEFAULT_BASIS_COUNT: usize = 150;
pub const DEFAULT_BASIS_RADIUS: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum MutualError {
    #[error("InvalidCount: basis needs at least one point")]
    InvalidCount,
    #[error("InvalidRadius: {0}")]
    InvalidRadius(f64),
    #[error("EmptySurface: body surface has no points")]
    EmptySurface,
    #[error("BadFormat: {0}")]
    BadFormat(String),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Points on a sphere around the crop-frame origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    pub points: Vec<Vec3>,
    pub radius: f64,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, by: &Vec3) -> BasisSet {
        BasisSet { points: self.points.iter().map(|p| p + by).collect(), radius: self.radius }
    }
}

pub fn fibonacci_basis(count: usize, radius: f64) -> Result<BasisSet, MutualError> {
    if count == 0 {
        return Err(MutualError::InvalidCount);
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MutualError::InvalidRadius(radius));
    }
    let points = fibonacci_directions(count).into_iter().map(|d| d * radius).collect();
    Ok(BasisSet { points, radius })
}

pub fn per_vertex_signed_distance(volume: &SdfVolume, markers: &[Vec3]) -> Vec<f64> {
    markers.iter().map(|m| volume.sample(m)).collect()
}

/// Static bounding-box tree over a point cloud for exact nearest-distance queries.
#[derive(Debug, Clone)]
pub struct PointTree {
    points: Vec<Vec3>,
    /// Point indices permuted so every node covers a contiguous range.
    order: Vec<usize>,
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone)]
struct TreeNode {
    min: Vec3,
    max: Vec3,
    lo: usize,
    hi: usize,
    /// Child node indices; `None` for leaves.
    children: Option<(usize, usize)>,
}

impl TreeNode {
    fn distance_squared(&self, q: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let v = (self.min[a] - q[a]).max(q[a] - self.max[a]).max(0.0);
            d2 += v * v;
        }
        d2
    }
}

const TREE_LEAF: usize = 8;

impl PointTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self { points: points.to_vec(), order: (0..points.len()).collect(), nodes: Vec::new() };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, lo: usize, hi: usize) -> usize {
        let (mut min, mut max) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[lo..hi] {
            min = min.inf(&self.points[i]);
            max = max.sup(&self.points[i]);
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode { min, max, lo, hi, children: None });
        if hi - lo > TREE_LEAF {
            let axis = (max - min).imax();
            let mid = (lo + hi) / 2;
            let points = &self.points;
            self.order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
            let left = self.build(lo, mid);
            let right = self.build(mid, hi);
            self.nodes[id].children = Some((left, right));
        }
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest Euclidean distance from `q` to any point, with the point's
    /// index (lowest index on ties).
    pub fn nearest(&self, q: &Vec3) -> Option<(f64, usize)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(q, 0, &mut best);
        Some((best.0.sqrt(), best.1))
    }

    /// Indices of all points within `radius` of `q` (inclusive), in ascending order.
    pub fn within(&self, q: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !self.points.is_empty() {
            self.collect(q, radius * radius, 0, out);
        }
        out.sort_unstable();
    }

    fn collect(&self, q: &Vec3, r2: f64, node: usize, out: &mut Vec<usize>) {
        let n = &self.nodes[node];
        if n.distance_squared(q) > r2 {
            return;
        }
        match n.children {
            Some((a, b)) => {
                self.collect(q, r2, a, out);
                self.collect(q, r2, b, out);
            }
            None => out.extend(self.order[n.lo..n.hi].iter().copied().filter(|&i| (self.points[i] - q).norm_squared() <= r2)),
        }
    }

    fn search(&self, q: &Vec3, node: usize, best: &mut (f64, usize)) {
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &i in &self.order[n.lo..n.hi] {
                    let d2 = (self.points[i] - q).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && i < best.1) {
                        *best = (d2, i);
                    }
                }
            }
            Some((a, b)) => {
                let (da, db) = (self.nodes[a].distance_squared(q), self.nodes[b].distance_squared(q));
                let order = if da <= db { [(a, da), (b, db)] } else { [(b, db), (a, da)] };
                for (child, d2) in order {
                    if d2 <= best.0 {
                        self.search(q, child, best);
                    }
                }
            }
        }
    }
}

pub fn per_basis_distance(basis: &BasisSet, surface: &[Vec3]) -> Result<Vec<f64>, MutualError> {
    if surface.is_empty() {
        return Err(MutualError::EmptySurface);
    }
    let tree = PointTree::new(surface);
    Ok(basis.points.iter().map(|p| tree.nearest(p).expect("non-empty").0).collect())
}

/// Per-frame distances for `L` frames: `d` is `L × K`, `b` is `L × P`, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSequence {
    pub d: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl DistanceSequence {
    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn marker_count(&self) -> usize {
        self.d.first().map_or(0, Vec::len)
    }

    pub fn basis_count(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn quantize_f32(&mut self) {
        for row in self.d.iter_mut().chain(self.b.iter_mut()) {
            for v in row.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> DistanceSequence {
        DistanceSequence { d: self.d[start..end].to_vec(), b: self.b[start..end].to_vec() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "frame,kind,index,value")?;
        for (f, (d, b)) in self.d.iter().zip(&self.b).enumerate() {
            for (i, v) in d.iter().enumerate() {
                writeln!(w, "{f},d,{i},{v}")?;
            }
            for (i, v) in b.iter().enumerate() {
                writeln!(w, "{f},b,{i},{v}")?;
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"MDDS")?;
        w.write_u32::<LittleEndian>(1)?;
        w.write_u32::<LittleEndian>(self.len() as u32)?;
        w.write_u32::<LittleEndian>(self.marker_count() as u32)?;
        w.write_u32::<LittleEndian>(self.basis_count() as u32)?;
        for (d, b) in self.d.iter().zip(&self.b) {
            for &v in d.iter().chain(b) {
                w.write_f32::<LittleEndian>(v as f32)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, MutualError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"MDDS" {
            return Err(MutualError::BadFormat("missing MDDS magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != 1 {
            return Err(MutualError::BadFormat(format!("unsupported MDDS version {version}")));
        }
        let frames = r.read_u32::<LittleEndian>()? as usize;
        let k = r.read_u32::<LittleEndian>()? as usize;
        let p = r.read_u32::<LittleEndian>()? as usize;
        let mut out = DistanceSequence { d: Vec::with_capacity(frames), b: Vec::with_capacity(frames) };
        let mut buf = vec![0f32; k + p];
        for _ in 0..frames {
            r.read_f32_into::<LittleEndian>(&mut buf)?;
            out.d.push(buf[..k].iter().map(|&v| v as f64).collect());
            out.b.push(buf[k..].iter().map(|&v| v as f64).collect());
        }
        Ok(out)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), MutualError> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MutualError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Distances of every frame of `motion`, all in the volume/basis frame.
pub fn sequence_distances(
    volume: &SdfVolume,
    basis: &BasisSet,
    skeleton: &Skeleton,
    sampler: &SurfaceSampler,
    motion: &MotionSequence,
) -> Result<DistanceSequence, MutualError> {
    let mut out = DistanceSequence { d: Vec::with_capacity(motion.len()), b: Vec::with_capacity(motion.len()) };
    for pose in &motion.frames {
        let markers = skeleton.marker_vertices(pose)?;
        out.d.push(per_vertex_signed_distance(volume, &markers));
        let surface = sampler.pose(skeleton, pose)?;
        out.b.push(per_basis_distance(basis, &surface.points)?);
    }
    Ok(out)
}
