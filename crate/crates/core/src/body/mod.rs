//! Capsule-skeleton human body standing in for a parametric mesh model.

mod pose;
pub mod rotation;
mod skeleton;
mod surface;

pub use pose::{MotionSequence, Pose};
pub use rotation::{matrix_to_rot6d, rot6d_to_matrix, Rot6, IDENTITY_6D};
pub use skeleton::{
    area_weighted_markers, fibonacci_directions, AnchoredPoint, Bone, Joint, Marker, PosedJoints,
    Skeleton, DEFAULT_MARKER_COUNT, GOLDEN_ANGLE,
};
pub use surface::{body_surface_points, point_segment_distance, BodySurface, SurfaceSampler, DEFAULT_SURFACE_DENSITY};

#[derive(Debug, thiserror::Error)]
pub enum BodyError {
    #[error("DegenerateRotation6D: the two 6-D columns are parallel")]
    DegenerateRotation6D,
    #[error("NotARotation: matrix is not orthonormal with determinant +1")]
    NotARotation,
    #[error("DimensionMismatch: expected pose dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("InvalidSkeleton: {0}")]
    InvalidSkeleton(String),
    #[error("InvalidDensity: {0}")]
    InvalidDensity(f64),
    #[error("BadFormat: {0}")]
    BadFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
