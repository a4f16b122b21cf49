//! Capsule skeleton: joint hierarchy, one capsule per joint, and surface
//! markers anchored on the capsules.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::pose::Pose;
use super::rotation::rot6d_to_matrix;
use super::BodyError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    /// `None` only for the root (joint 0).
    pub parent: Option<usize>,
    /// Rest offset from the parent joint, in the parent's frame.
    pub offset: [f64; 3],
}

/// Capsule rigidly attached to `joint`: a segment from the joint origin to
/// `tip` (joint-local coordinates) swept by `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bone {
    pub joint: usize,
    pub tip: [f64; 3],
    pub radius: f64,
}

/// Surface anchor on a bone's capsule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub bone: usize,
    /// Position along the bone axis, 0 at the joint and 1 at the tip.
    pub axial: f64,
    /// Angle around the axis from the bone's reference normal (radians).
    pub azimuth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
    pub bones: Vec<Bone>,
    pub markers: Vec<Marker>,
}

/// A point fixed in some joint's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredPoint {
    pub joint: usize,
    pub local: Vec3,
}

pub const DEFAULT_MARKER_COUNT: usize = 67;

/// Global rotation and position of every joint.
#[derive(Debug, Clone)]
pub struct PosedJoints {
    pub rotations: Vec<Matrix3<f64>>,
    pub positions: Vec<Vec3>,
}

impl PosedJoints {
    pub fn transform(&self, p: &AnchoredPoint) -> Vec3 {
        self.positions[p.joint] + self.rotations[p.joint] * p.local
    }
}

impl Skeleton {
    pub fn validate(&self) -> Result<(), BodyError> {
        if self.joints.is_empty() || self.joints[0].parent.is_some() {
            return Err(BodyError::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (j, joint) in self.joints.iter().enumerate().skip(1) {
            match joint.parent {
                Some(p) if p < j => {}
                _ => {
                    return Err(BodyError::InvalidSkeleton(format!(
                        "joint {j} must have a parent with a smaller index"
                    )))
                }
            }
        }
        for (b, bone) in self.bones.iter().enumerate() {
            if bone.joint >= self.joints.len() || !(bone.radius > 0.0) {
                return Err(BodyError::InvalidSkeleton(format!("bone {b} is invalid")));
            }
        }
        for (m, marker) in self.markers.iter().enumerate() {
            if marker.bone >= self.bones.len() || !(0.0..=1.0).contains(&marker.axial) {
                return Err(BodyError::InvalidSkeleton(format!("marker {m} is invalid")));
            }
        }
        Ok(())
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn marker_count(&self) -> usize {
        self.markers.len()
    }

    /// Length of the flattened pose vector: 3 + 6 + 6 per non-root joint.
    pub fn pose_dim(&self) -> usize {
        9 + 6 * (self.joints.len() - 1)
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.joints.iter().map(|j| j.parent).collect()
    }

    pub fn offsets(&self) -> Vec<Vec3> {
        self.joints.iter().map(|j| Vec3::from(j.offset)).collect()
    }

    pub fn posed(&self, pose: &Pose) -> Result<PosedJoints, BodyError> {
        if pose.local.len() + 1 != self.joints.len() {
            return Err(BodyError::DimensionMismatch {
                expected: self.pose_dim(),
                actual: pose.dim(),
            });
        }
        let n = self.joints.len();
        let mut rotations = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        rotations.push(rot6d_to_matrix(&pose.root)?);
        positions.push(pose.translation);
        for j in 1..n {
            let parent = self.joints[j].parent.expect("validated skeleton");
            let local = rot6d_to_matrix(&pose.local[j - 1])?;
            let pos = positions[parent] + rotations[parent] * Vec3::from(self.joints[j].offset);
            let rot = rotations[parent] * local;
            positions.push(pos);
            rotations.push(rot);
        }
        Ok(PosedJoints { rotations, positions })
    }

    /// Joint positions (J×3 meters).
    pub fn forward_kinematics(&self, pose: &Pose) -> Result<Vec<Vec3>, BodyError> {
        Ok(self.posed(pose)?.positions)
    }

    /// Orthonormal `(axis, normal, binormal)` frame of a bone in its joint's
    /// local coordinates. Zero-length bones use the local z axis.
    pub fn bone_frame(&self, bone: usize) -> (Vec3, Vec3, Vec3) {
        let tip = Vec3::from(self.bones[bone].tip);
        let axis = if tip.norm() < 1e-12 { Vec3::z() } else { tip.normalize() };
        let helper = if axis.z.abs() < 0.9 { Vec3::z() } else { Vec3::x() };
        let normal = helper.cross(&axis).normalize();
        let binormal = axis.cross(&normal);
        (axis, normal, binormal)
    }

    pub fn marker_template(&self) -> Vec<AnchoredPoint> {
        self.markers
            .iter()
            .map(|m| {
                let bone = &self.bones[m.bone];
                let (_, n1, n2) = self.bone_frame(m.bone);
                let local = Vec3::from(bone.tip) * m.axial
                    + (n1 * m.azimuth.cos() + n2 * m.azimuth.sin()) * bone.radius;
                AnchoredPoint { joint: bone.joint, local }
            })
            .collect()
    }

    /// Marker positions `v_t` (K×3 meters).
    pub fn marker_vertices(&self, pose: &Pose) -> Result<Vec<Vec3>, BodyError> {
        let posed = self.posed(pose)?;
        Ok(self.marker_template().iter().map(|p| posed.transform(p)).collect())
    }

    /// Surface area of each bone capsule.
    pub fn bone_areas(&self) -> Vec<f64> {
        self.bones
            .iter()
            .map(|b| {
                let len = Vec3::from(b.tip).norm();
                TAU * b.radius * len + 4.0 * PI * b.radius * b.radius
            })
            .collect()
    }

    /// Deterministic stratified samples on every capsule, in joint-local
    /// frames. Each capsule receives `round(density * area)` points, split
    /// between its cylinder (helical lattice) and its caps (Fibonacci sphere).
    pub fn surface_template(&self, density: f64) -> Vec<(usize, AnchoredPoint)> {
        let mut out = Vec::new();
        for (b, bone) in self.bones.iter().enumerate() {
            let tip = Vec3::from(bone.tip);
            let len = tip.norm();
            let r = bone.radius;
            let cyl_area = TAU * r * len;
            let cap_area = 4.0 * PI * r * r;
            let total = (density * (cyl_area + cap_area)).round() as usize;
            let n_cyl = ((total as f64) * cyl_area / (cyl_area + cap_area)).round() as usize;
            let n_cap = total - n_cyl;
            let (axis, n1, n2) = self.bone_frame(b);
            for i in 0..n_cyl {
                let s = (i as f64 + 0.5) / n_cyl as f64;
                let phi = i as f64 * GOLDEN_ANGLE;
                let local = tip * s + (n1 * phi.cos() + n2 * phi.sin()) * r;
                out.push((b, AnchoredPoint { joint: bone.joint, local }));
            }
            for w in fibonacci_directions(n_cap) {
                // Direction expressed in the bone frame; upper half belongs to the tip cap.
                let dir = n1 * w.x + n2 * w.y + axis * w.z;
                let base = if w.z >= 0.0 && len > 0.0 { tip } else { Vec3::zeros() };
                out.push((b, AnchoredPoint { joint: bone.joint, local: base + dir * r }));
            }
        }
        out
    }

    /// Default 16-joint body: pelvis root, two spine joints, head, and
    /// shoulder/elbow/wrist and hip/knee/ankle chains on both sides. Rest
    /// pose stands upright along +z, facing +x, with the left side on +y.
    pub fn default_body() -> Self {
        let j = |name: &str, parent: Option<usize>, offset: [f64; 3]| Joint {
            name: name.to_string(),
            parent,
            offset,
        };
        let joints = vec![
            j("pelvis", None, [0.0, 0.0, 0.0]),
            j("spine1", Some(0), [0.0, 0.0, 0.12]),
            j("spine2", Some(1), [0.0, 0.0, 0.20]),
            j("head", Some(2), [0.0, 0.0, 0.22]),
            j("l_shoulder", Some(2), [0.0, 0.18, 0.17]),
            j("l_elbow", Some(4), [0.0, 0.0, -0.28]),
            j("l_wrist", Some(5), [0.0, 0.0, -0.26]),
            j("r_shoulder", Some(2), [0.0, -0.18, 0.17]),
            j("r_elbow", Some(7), [0.0, 0.0, -0.28]),
            j("r_wrist", Some(8), [0.0, 0.0, -0.26]),
            j("l_hip", Some(0), [0.0, 0.09, -0.05]),
            j("l_knee", Some(10), [0.0, 0.0, -0.42]),
            j("l_ankle", Some(11), [0.0, 0.0, -0.42]),
            j("r_hip", Some(0), [0.0, -0.09, -0.05]),
            j("r_knee", Some(13), [0.0, 0.0, -0.42]),
            j("r_ankle", Some(14), [0.0, 0.0, -0.42]),
        ];
        let b = |joint: usize, tip: [f64; 3], radius: f64| Bone { joint, tip, radius };
        let bones = vec![
            b(0, [0.0, 0.0, 0.12], 0.13),
            b(1, [0.0, 0.0, 0.20], 0.13),
            b(2, [0.0, 0.0, 0.20], 0.14),
            b(3, [0.02, 0.0, 0.18], 0.10),
            b(4, [0.0, 0.0, -0.28], 0.05),
            b(5, [0.0, 0.0, -0.26], 0.045),
            b(6, [0.0, 0.0, -0.10], 0.04),
            b(7, [0.0, 0.0, -0.28], 0.05),
            b(8, [0.0, 0.0, -0.26], 0.045),
            b(9, [0.0, 0.0, -0.10], 0.04),
            b(10, [0.0, 0.0, -0.42], 0.075),
            b(11, [0.0, 0.0, -0.42], 0.055),
            b(12, [0.14, 0.0, -0.03], 0.04),
            b(13, [0.0, 0.0, -0.42], 0.075),
            b(14, [0.0, 0.0, -0.42], 0.055),
            b(15, [0.14, 0.0, -0.03], 0.04),
        ];
        let mut skeleton = Skeleton {
            joints,
            bones,
            markers: Vec::new(),
        };
        skeleton.markers = area_weighted_markers(&skeleton.bone_areas(), DEFAULT_MARKER_COUNT);
        skeleton
    }

    pub fn from_json(text: &str) -> Result<Self, BodyError> {
        let skeleton: Skeleton =
            serde_json::from_str(text).map_err(|e| BodyError::InvalidSkeleton(e.to_string()))?;
        skeleton.validate()?;
        Ok(skeleton)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, BodyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Golden angle in radians, π(3 − √5).
pub const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// `n` unit vectors on a Fibonacci sphere lattice.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = i as f64 * GOLDEN_ANGLE;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Spreads `count` markers over bones in proportion to capsule area
/// (largest-remainder rounding), each bone's share on a helical lattice.
pub fn area_weighted_markers(areas: &[f64], count: usize) -> Vec<Marker> {
    let total: f64 = areas.iter().sum();
    let quotas: Vec<f64> = areas.iter().map(|a| a / total * count as f64).collect();
    let mut per_bone: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..areas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = per_bone.iter().sum();
    for &b in order.iter().take(count - assigned) {
        per_bone[b] += 1;
    }
    let mut markers = Vec::with_capacity(count);
    for (bone, &n) in per_bone.iter().enumerate() {
        for i in 0..n {
            markers.push(Marker {
                bone,
                axial: (i as f64 + 0.5) / n as f64,
                azimuth: (i as f64 * GOLDEN_ANGLE) % TAU,
            });
        }
    }
    markers
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::rotation::{axis_angle, matrix_to_rot6d};

    #[test]
    fn default_body_shape() {
        let s = Skeleton::default_body();
        s.validate().unwrap();
        assert_eq!(s.joint_count(), 16);
        assert_eq!(s.pose_dim(), 99);
        assert_eq!(s.marker_count(), 67);
        let back = Skeleton::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rest_pose_is_cumulative_offsets() {
        let s = Skeleton::default_body();
        let joints = s.forward_kinematics(&Pose::rest(&s)).unwrap();
        let mut expected = vec![Vec3::zeros(); s.joint_count()];
        for j in 1..s.joint_count() {
            expected[j] = expected[s.joints[j].parent.unwrap()] + Vec3::from(s.joints[j].offset);
        }
        assert_eq!(joints, expected);

        let mut moved = Pose::rest(&s);
        moved.translation = Vec3::new(1.0, 2.0, 3.0);
        let shifted = s.forward_kinematics(&moved).unwrap();
        for (a, b) in shifted.iter().zip(&expected) {
            assert!((a - b - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn elbow_quarter_turn_on_three_joint_chain() {
        // shoulder -> elbow -> wrist, each offset 1 m down -z.
        let s = Skeleton {
            joints: vec![
                Joint { name: "shoulder".into(), parent: None, offset: [0.0; 3] },
                Joint { name: "elbow".into(), parent: Some(0), offset: [0.0, 0.0, -1.0] },
                Joint { name: "wrist".into(), parent: Some(1), offset: [0.0, 0.0, -1.0] },
            ],
            bones: vec![],
            markers: vec![],
        };
        let mut pose = Pose::rest(&s);
        pose.local[0] = matrix_to_rot6d(&axis_angle(Vec3::x(), std::f64::consts::FRAC_PI_2)).unwrap();
        let joints = s.forward_kinematics(&pose).unwrap();
        // Rx(90°)·(0,0,-1) = (0,1,0): the forearm swings to +y.
        assert!((joints[1] - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!((joints[2] - Vec3::new(0.0, 1.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn marker_at_bone_start_sits_on_reference_normal() {
        let mut s = Skeleton::default_body();
        s.markers = vec![Marker { bone: 10, axial: 0.0, azimuth: 0.0 }];
        let v = s.marker_vertices(&Pose::rest(&s)).unwrap();
        let joints = s.forward_kinematics(&Pose::rest(&s)).unwrap();
        let (_, n1, _) = s.bone_frame(10);
        assert!((v[0] - (joints[10] + n1 * 0.075)).norm() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let s = Skeleton::default_body();
        let pose = Pose { translation: Vec3::zeros(), root: crate::body::IDENTITY_6D, local: vec![] };
        assert!(matches!(s.forward_kinematics(&pose), Err(BodyError::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_hierarchy_rejected() {
        let mut s = Skeleton::default_body();
        s.joints[3].parent = Some(5);
        assert!(s.validate().is_err());
    }
}
