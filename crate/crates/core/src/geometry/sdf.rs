//! Signed distance volumes: voxelization from meshes, trilinear sampling and
//! cropping around a point of interest.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use super::bvh::{sign_unchecked, Bvh};
use super::{GeometryError, TriangleMesh, Vec3};

/// Placement of a cubic voxel grid. Voxel `(i, j, k)` has its center at
/// `origin + (idx + 0.5) * voxel_size`, so `origin` is the grid's min corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(origin: Vec3, voxel_size: f64, resolution: usize) -> Result<Self, GeometryError> {
        if resolution < 2 {
            return Err(GeometryError::GridTooSmall(resolution));
        }
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(GeometryError::InvalidVoxelSize(voxel_size));
        }
        Ok(Self {
            origin,
            voxel_size,
            resolution,
        })
    }

    /// Grid of `resolution` voxels spanning the cube `center ± half_extent`.
    pub fn centered(center: Vec3, half_extent: f64, resolution: usize) -> Result<Self, GeometryError> {
        Self::new(
            center - Vec3::repeat(half_extent),
            2.0 * half_extent / resolution as f64,
            resolution,
        )
    }

    pub fn voxel_count(&self) -> usize {
        self.resolution.pow(3)
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    /// Flat index in x-fastest order.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn extent(&self) -> f64 {
        self.voxel_size * self.resolution as f64
    }
}

/// A cubic grid of signed distances, negative inside the solid.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfVolume {
    spec: GridSpec,
    values: Vec<f64>,
}

/// Per-axis cell lookup: lower index, fractional offset, and whether the
/// coordinate was clamped (zero derivative along that axis).
#[derive(Clone, Copy)]
struct AxisCell {
    lo: usize,
    frac: f64,
    clamped: bool,
}

impl SdfVolume {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self, GeometryError> {
        if values.len() != spec.voxel_count() {
            return Err(GeometryError::ValueCountMismatch {
                expected: spec.voxel_count(),
                actual: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Rounds every value through `f32`, matching what the file format stores.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    fn axis_cell(&self, coord: f64, axis: usize) -> AxisCell {
        let n = self.spec.resolution;
        let g = (coord - self.spec.origin[axis]) / self.spec.voxel_size - 0.5;
        let max = (n - 1) as f64;
        let (g, clamped) = if g < 0.0 {
            (0.0, true)
        } else if g > max {
            (max, true)
        } else {
            (g, false)
        };
        let lo = (g.floor() as usize).min(n - 2);
        AxisCell {
            lo,
            frac: g - lo as f64,
            clamped,
        }
    }

    fn corners(&self, cells: &[AxisCell; 3]) -> [f64; 8] {
        let mut c = [0.0; 8];
        for (n, slot) in c.iter_mut().enumerate() {
            let (dx, dy, dz) = (n & 1, (n >> 1) & 1, (n >> 2) & 1);
            *slot = self.value(cells[0].lo + dx, cells[1].lo + dy, cells[2].lo + dz);
        }
        c
    }

    /// Trilinear interpolation; points outside the voxel-center box are
    /// clamped onto it.
    pub fn sample(&self, q: &Vec3) -> f64 {
        let cells = [self.axis_cell(q.x, 0), self.axis_cell(q.y, 1), self.axis_cell(q.z, 2)];
        let c = self.corners(&cells);
        let (u, v, w) = (cells[0].frac, cells[1].frac, cells[2].frac);
        let x00 = c[0] + (c[1] - c[0]) * u;
        let x10 = c[2] + (c[3] - c[2]) * u;
        let x01 = c[4] + (c[5] - c[4]) * u;
        let x11 = c[6] + (c[7] - c[6]) * u;
        let y0 = x00 + (x10 - x00) * v;
        let y1 = x01 + (x11 - x01) * v;
        y0 + (y1 - y0) * w
    }

    /// Analytic gradient of [`SdfVolume::sample`] with respect to `q`.
    pub fn gradient(&self, q: &Vec3) -> Vec3 {
        self.sample_with_gradient(q).1
    }

    pub fn sample_with_gradient(&self, q: &Vec3) -> (f64, Vec3) {
        let cells = [self.axis_cell(q.x, 0), self.axis_cell(q.y, 1), self.axis_cell(q.z, 2)];
        let c = self.corners(&cells);
        let (u, v, w) = (cells[0].frac, cells[1].frac, cells[2].frac);
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let x00 = lerp(c[0], c[1], u);
        let x10 = lerp(c[2], c[3], u);
        let x01 = lerp(c[4], c[5], u);
        let x11 = lerp(c[6], c[7], u);
        let y0 = lerp(x00, x10, v);
        let y1 = lerp(x01, x11, v);
        let value = lerp(y0, y1, w);

        let dw = y1 - y0;
        let dv = lerp(x10 - x00, x11 - x01, w);
        let du = lerp(
            lerp(c[1] - c[0], c[3] - c[2], v),
            lerp(c[5] - c[4], c[7] - c[6], v),
            w,
        );
        let inv_h = 1.0 / self.spec.voxel_size;
        let mut g = Vec3::new(du, dv, dw) * inv_h;
        for a in 0..3 {
            if cells[a].clamped {
                g[a] = 0.0;
            }
        }
        (value, g)
    }

    /// Sub-volume covering `center ± radius`, snapped to this grid and
    /// re-expressed with `center` as the local origin. Cells beyond the
    /// source grid copy the nearest boundary value.
    pub fn crop(&self, center: &Vec3, radius: f64) -> Result<SdfVolume, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        let h = self.spec.voxel_size;
        let n_src = self.spec.resolution as i64;
        let resolution = ((2.0 * radius / h).round() as usize).max(2);
        let start: [i64; 3] = std::array::from_fn(|a| {
            ((center[a] - radius - self.spec.origin[a]) / h).round() as i64
        });
        let overlaps = (0..3).all(|a| start[a] < n_src && start[a] + resolution as i64 > 0);
        if !overlaps {
            return Err(GeometryError::CropOutsideVolume);
        }
        let clamp = |v: i64| v.clamp(0, n_src - 1) as usize;
        let mut values = Vec::with_capacity(resolution.pow(3));
        for k in 0..resolution as i64 {
            for j in 0..resolution as i64 {
                for i in 0..resolution as i64 {
                    values.push(self.value(
                        clamp(start[0] + i),
                        clamp(start[1] + j),
                        clamp(start[2] + k),
                    ));
                }
            }
        }
        let world_corner = self.spec.origin
            + Vec3::new(start[0] as f64, start[1] as f64, start[2] as f64) * h;
        let spec = GridSpec::new(world_corner - center, h, resolution)?;
        SdfVolume::from_values(spec, values)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(SDF_MAGIC)?;
        w.write_u32::<LittleEndian>(SDF_VERSION)?;
        for a in 0..3 {
            w.write_f64::<LittleEndian>(self.spec.origin[a])?;
        }
        w.write_f64::<LittleEndian>(self.spec.voxel_size)?;
        w.write_u32::<LittleEndian>(self.spec.resolution as u32)?;
        for &v in &self.values {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, GeometryError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SDF_MAGIC {
            return Err(GeometryError::BadFormat("missing MDSF magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != SDF_VERSION {
            return Err(GeometryError::BadFormat(format!("unsupported MDSF version {version}")));
        }
        let mut origin = Vec3::zeros();
        for a in 0..3 {
            origin[a] = r.read_f64::<LittleEndian>()?;
        }
        let voxel_size = r.read_f64::<LittleEndian>()?;
        let resolution = r.read_u32::<LittleEndian>()? as usize;
        let spec = GridSpec::new(origin, voxel_size, resolution)?;
        let mut raw = vec![0f32; spec.voxel_count()];
        r.read_f32_into::<LittleEndian>(&mut raw)?;
        Self::from_values(spec, raw.into_iter().map(f64::from).collect())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), GeometryError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, GeometryError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

const SDF_MAGIC: &[u8; 4] = b"MDSF";
const SDF_VERSION: u32 = 1;

/// Exact signed distance at every voxel center: the BVH closest-point
/// distance, negated where ray parity says the center is inside.
pub fn voxelize_sdf(mesh: &TriangleMesh, spec: GridSpec) -> Result<SdfVolume, GeometryError> {
    if spec.resolution < 2 {
        return Err(GeometryError::GridTooSmall(spec.resolution));
    }
    mesh.ensure_watertight()?;
    let bvh = Bvh::build(mesh)?;
    let (lo, hi) = mesh.bounds();
    let grid_hi = spec.origin + Vec3::repeat(spec.extent());
    if (0..3).any(|a| grid_hi[a] < lo[a] || spec.origin[a] > hi[a]) {
        log::warn!("voxel grid does not overlap the mesh bounds");
    }
    let n = spec.resolution;
    let slices: Result<Vec<Vec<f64>>, GeometryError> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut slice = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let c = spec.voxel_center(i, j, k);
                    let hit = bvh.closest_point(&c);
                    let value = if hit.distance < 1e-12 {
                        0.0
                    } else {
                        f64::from(sign_unchecked(&bvh, &c)?) * hit.distance
                    };
                    slice.push(value);
                }
            }
            Ok(slice)
        })
        .collect();
    let values = slices?.concat();
    SdfVolume::from_values(spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_volume() -> SdfVolume {
        let cube = TriangleMesh::cuboid(Vec3::repeat(-0.5), Vec3::repeat(0.5)).unwrap();
        // 21 voxels over [-1.05, 1.05]: centers on a 0.1 lattice through the origin.
        voxelize_sdf(&cube, GridSpec::centered(Vec3::zeros(), 1.05, 21).unwrap()).unwrap()
    }

    #[test]
    fn cube_center_and_exterior() {
        let vol = cube_volume();
        assert!((vol.value(10, 10, 10) + 0.5).abs() < 1e-12);
        let c = vol.spec().voxel_center(19, 10, 10);
        assert!((c.x - 0.9).abs() < 1e-12);
        assert!((vol.value(19, 10, 10) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn sampling_identity_and_midpoint() {
        let vol = cube_volume();
        let spec = *vol.spec();
        for &(i, j, k) in &[(0, 0, 0), (3, 7, 11), (20, 20, 20), (10, 4, 19)] {
            assert!((vol.sample(&spec.voxel_center(i, j, k)) - vol.value(i, j, k)).abs() < 1e-12);
        }
        let a = spec.voxel_center(4, 5, 6);
        let b = spec.voxel_center(5, 5, 6);
        let mid = vol.sample(&((a + b) * 0.5));
        assert!((mid - 0.5 * (vol.value(4, 5, 6) + vol.value(5, 5, 6))).abs() < 1e-12);
    }

    #[test]
    fn out_of_grid_is_clamped_and_finite() {
        let vol = cube_volume();
        let far = Vec3::new(50.0, -40.0, 3.0);
        let v = vol.sample(&far);
        assert!(v.is_finite());
        assert_eq!(v, vol.value(20, 0, 20));
        assert_eq!(vol.gradient(&far), Vec3::zeros());
    }

    #[test]
    fn rejects_small_grid() {
        assert!(matches!(
            GridSpec::new(Vec3::zeros(), 0.1, 1),
            Err(GeometryError::GridTooSmall(1))
        ));
    }

    #[test]
    fn file_round_trip() {
        let mut vol = cube_volume();
        vol.quantize_f32();
        let mut buf = Vec::new();
        vol.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MDSF");
        assert_eq!(buf.len(), 4 + 4 + 24 + 8 + 4 + 4 * 21usize.pow(3));
        let back = SdfVolume::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, vol);
    }

    #[test]
    fn crop_outside_fails() {
        let vol = cube_volume();
        assert!(matches!(
            vol.crop(&Vec3::new(10.0, 0.0, 0.0), 0.5),
            Err(GeometryError::CropOutsideVolume)
        ));
        assert!(matches!(
            vol.crop(&Vec3::zeros(), 0.0),
            Err(GeometryError::InvalidRadius(_))
        ));
    }
}
