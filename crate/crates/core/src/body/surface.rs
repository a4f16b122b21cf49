use super::pose::Pose;
use super::skeleton::{AnchoredPoint, Skeleton};
use super::BodyError;
use crate::geometry::Vec3;

/// Target sampling density in points per square meter (~1 450 points on the
/// default body).
pub const DEFAULT_SURFACE_DENSITY: f64 = 500.0;

/// Points sampled on the union of posed capsules.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySurface {
    pub points: Vec<Vec3>,
    /// Bone index each point was sampled from.
    pub bones: Vec<usize>,
    pub density: f64,
}

impl BodySurface {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Samples a skeleton's capsule surface once and reposes it cheaply.
#[derive(Debug, Clone)]
pub struct SurfaceSampler {
    template: Vec<(usize, AnchoredPoint)>,
    density: f64,
}

impl SurfaceSampler {
    pub fn new(skeleton: &Skeleton, density: f64) -> Result<Self, BodyError> {
        if !(density > 0.0) {
            return Err(BodyError::InvalidDensity(density));
        }
        Ok(Self { template: skeleton.surface_template(density), density })
    }

    pub fn anchors(&self) -> impl Iterator<Item = &AnchoredPoint> {
        self.template.iter().map(|(_, p)| p)
    }

    pub fn len(&self) -> usize {
        self.template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template.is_empty()
    }

    pub fn pose(&self, skeleton: &Skeleton, pose: &Pose) -> Result<BodySurface, BodyError> {
        let posed = skeleton.posed(pose)?;
        Ok(BodySurface {
            points: self.template.iter().map(|(_, p)| posed.transform(p)).collect(),
            bones: self.template.iter().map(|(b, _)| *b).collect(),
            density: self.density,
        })
    }
}

pub fn body_surface_points(skeleton: &Skeleton, pose: &Pose, density: f64) -> Result<BodySurface, BodyError> {
    SurfaceSampler::new(skeleton, density)?.pose(skeleton, pose)
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}
