use std::collections::HashMap;

use super::{GeometryError, Vec3};

/// Triangles with twice-area below this are rejected as degenerate.
const MIN_DOUBLE_AREA: f64 = 1e-14;

/// An indexed triangle mesh in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Builds a validated mesh: non-empty, indices in range, no zero-area faces.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if triangles.is_empty() || vertices.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        let n = vertices.len();
        for (index, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v as usize >= n) {
                return Err(GeometryError::IndexOutOfRange(index));
            }
            let [a, b, c] = tri.map(|v| vertices[v as usize]);
            if (b - a).cross(&(c - a)).norm() < MIN_DOUBLE_AREA {
                return Err(GeometryError::DegenerateTriangle(index));
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, index: usize) -> [Vec3; 3] {
        self.triangles[index].map(|v| self.vertices[v as usize])
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Every undirected edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 3);
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges.values().all(|&count| count == 2)
    }

    pub fn ensure_watertight(&self) -> Result<(), GeometryError> {
        if self.is_watertight() {
            Ok(())
        } else {
            Err(GeometryError::NonWatertightMesh)
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Concatenates meshes into one vertex/index space.
    pub fn merge(parts: &[TriangleMesh]) -> Result<Self, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in parts {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(&part.vertices);
            triangles.extend(part.triangles.iter().map(|t| t.map(|v| v + base)));
        }
        Self::new(vertices, triangles)
    }

    /// Closed axis-aligned box with outward-facing triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Self, GeometryError> {
        let corner = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        let vertices = (0..8).map(corner).collect();
        let triangles = vec![
            [0, 2, 1], [1, 2, 3], // -z
            [4, 5, 6], [5, 7, 6], // +z
            [0, 1, 4], [1, 5, 4], // -y
            [2, 6, 3], [3, 6, 7], // +y
            [0, 4, 2], [2, 4, 6], // -x
            [1, 3, 5], [3, 7, 5], // +x
        ];
        Self::new(vertices, triangles)
    }

    /// Closed vertical cylinder with fan-triangulated caps.
    pub fn cylinder(
        base_center: Vec3,
        radius: f64,
        height: f64,
        segments: usize,
    ) -> Result<Self, GeometryError> {
        let segments = segments.max(3);
        let mut vertices = Vec::with_capacity(2 * segments + 2);
        for ring in 0..2 {
            let z = base_center.z + ring as f64 * height;
            for s in 0..segments {
                let a = std::f64::consts::TAU * s as f64 / segments as f64;
                vertices.push(Vec3::new(
                    base_center.x + radius * a.cos(),
                    base_center.y + radius * a.sin(),
                    z,
                ));
            }
        }
        let bottom = vertices.len() as u32;
        vertices.push(base_center);
        let top = bottom + 1;
        vertices.push(base_center + Vec3::new(0.0, 0.0, height));
        let n = segments as u32;
        let mut triangles = Vec::with_capacity(4 * segments);
        for s in 0..n {
            let next = (s + 1) % n;
            triangles.push([s, next, n + next]);
            triangles.push([s, n + next, n + s]);
            triangles.push([bottom, next, s]);
            triangles.push([top, n + s, n + next]);
        }
        Self::new(vertices, triangles)
    }

    /// Icosphere built by repeated midpoint subdivision of an icosahedron.
    pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> Result<Self, GeometryError> {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
            (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
            (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                    (verts.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let vertices = verts.into_iter().map(|v| center + v * radius).collect();
        Self::new(vertices, faces)
    }
}
