//! Scene geometry: meshes, BVH proximity queries, and signed distance volumes.

mod bvh;
mod mesh;
pub mod obj;
mod sdf;

pub use bvh::{closest_point_on_triangle, point_sign, Aabb, Bvh, BvhNode, ClosestHit, MAX_SIGN_RETRIES};
pub use mesh::TriangleMesh;
pub use sdf::{voxelize_sdf, GridSpec, SdfVolume};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("EmptyMesh: mesh has no triangles")]
    EmptyMesh,
    #[error("DegenerateTriangle: triangle {0} has zero area")]
    DegenerateTriangle(usize),
    #[error("IndexOutOfRange: triangle {0} references a missing vertex")]
    IndexOutOfRange(usize),
    #[error("NonWatertightMesh: every edge must be shared by exactly two triangles")]
    NonWatertightMesh,
    #[error("SignUndecidable: ray parity grazed the surface on every retry")]
    SignUndecidable,
    #[error("GridTooSmall: resolution {0} < 2")]
    GridTooSmall(usize),
    #[error("InvalidVoxelSize: {0}")]
    InvalidVoxelSize(f64),
    #[error("InvalidRadius: {0}")]
    InvalidRadius(f64),
    #[error("CropOutsideVolume: crop box does not overlap the volume")]
    CropOutsideVolume,
    #[error("ValueCountMismatch: expected {expected} voxels, got {actual}")]
    ValueCountMismatch { expected: usize, actual: usize },
    #[error("BadFormat: {0}")]
    BadFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
