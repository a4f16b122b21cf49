mod common;

use common::{random_point, rng, segment_distance};
use mdkit::body::{body_surface_points, matrix_to_rot6d, rot6d_to_matrix, Bone, Joint, Marker, Pose, Skeleton};
use mdkit::geometry::Vec3;
use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;
use rand::Rng;

fn random_pose(skeleton: &Skeleton, r: &mut rand_chacha::ChaCha8Rng) -> Pose {
    let mut pose = Pose::rest(skeleton);
    pose.translation = random_point(r, 1.0);
    let rot = |r: &mut rand_chacha::ChaCha8Rng| {
        let axis = Unit::new_normalize(random_point(r, 1.0) + Vec3::new(0.0, 0.0, 1e-3));
        matrix_to_rot6d(Rotation3::from_axis_angle(&axis, r.gen_range(-1.5..1.5)).matrix()).unwrap()
    };
    pose.root = rot(r);
    for l in pose.local.iter_mut() {
        *l = rot(r);
    }
    pose
}

fn two_bone_body() -> Skeleton {
    let skeleton = Skeleton {
        joints: vec![
            Joint { name: "root".into(), parent: None, offset: [0.0; 3] },
            Joint { name: "elbow".into(), parent: Some(0), offset: [0.0, 0.0, 0.5] },
        ],
        bones: vec![
            Bone { joint: 0, tip: [0.0, 0.0, 0.5], radius: 0.1 },
            Bone { joint: 1, tip: [0.4, 0.0, 0.0], radius: 0.08 },
        ],
        markers: vec![Marker { bone: 0, axial: 0.5, azimuth: 0.0 }],
    };
    skeleton.validate().unwrap();
    skeleton
}

#[test]
fn translation_moves_every_joint_and_marker() {
    let skeleton = Skeleton::default_body();
    let mut r = rng(20);
    let pose = random_pose(&skeleton, &mut r);
    let mut moved = pose.clone();
    let shift = Vec3::new(1.0, 2.0, 3.0);
    moved.translation += shift;
    let (j0, j1) = (skeleton.forward_kinematics(&pose).unwrap(), skeleton.forward_kinematics(&moved).unwrap());
    for (a, b) in j0.iter().zip(&j1) {
        assert!((b - a - shift).norm() < 1e-12);
    }
    let (m0, m1) = (skeleton.marker_vertices(&pose).unwrap(), skeleton.marker_vertices(&moved).unwrap());
    for (a, b) in m0.iter().zip(&m1) {
        assert!((b - a - shift).norm() < 1e-12);
    }
}

#[test]
fn root_rotation_rotates_the_whole_body() {
    let skeleton = Skeleton::default_body();
    let mut r = rng(21);
    let pose = random_pose(&skeleton, &mut r);
    let turn = Rotation3::from_axis_angle(&Vec3::z_axis(), 0.7);
    let mut turned = pose.clone();
    turned.root = matrix_to_rot6d(&(turn.matrix() * rot6d_to_matrix(&pose.root).unwrap())).unwrap();
    let (a, b) = (skeleton.marker_vertices(&pose).unwrap(), skeleton.marker_vertices(&turned).unwrap());
    for (p, q) in a.iter().zip(&b) {
        let expected = pose.translation + turn * (p - pose.translation);
        assert!((q - expected).norm() < 1e-12);
    }
}

#[test]
fn surface_distance_converges_to_capsule_union() {
    let skeleton = two_bone_body();
    let mut r = rng(22);
    let pose = random_pose(&skeleton, &mut r);
    let joints = skeleton.forward_kinematics(&pose).unwrap();
    let elbow_tip = {
        let posed = skeleton.posed(&pose).unwrap();
        posed.transform(&mdkit::body::AnchoredPoint { joint: 1, local: Vec3::new(0.4, 0.0, 0.0) })
    };
    let analytic = |p: &Vec3| {
        (segment_distance(p, &joints[0], &joints[1]) - 0.1).min(segment_distance(p, &joints[1], &elbow_tip) - 0.08).max(0.0)
    };
    for density in [500.0, 5000.0] {
        let surface = body_surface_points(&skeleton, &pose, density).unwrap();
        let spacing = 1.0 / f64::sqrt(density);
        for _ in 0..50 {
            let p = pose.translation + random_point(&mut r, 1.0);
            let sampled = surface.points.iter().map(|s| (s - p).norm()).fold(f64::INFINITY, f64::min);
            let exact = analytic(&p);
            assert!(sampled >= exact - 1e-9, "sample closer than the capsule surface");
            assert!(sampled - exact <= 2.0 * spacing, "density {density}: {sampled} vs {exact}");
        }
    }
}

#[test]
fn skeleton_json_round_trip() {
    let skeleton = Skeleton::default_body();
    let back = Skeleton::from_json(&skeleton.to_json()).unwrap();
    assert_eq!(back, skeleton);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rot6d_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.05f64..1.0, angle in -3.1f64..3.1) {
        let m = *Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(x, y, z)), angle).matrix();
        let back = rot6d_to_matrix(&matrix_to_rot6d(&m).unwrap()).unwrap();
        prop_assert!((back - m).abs().max() < 1e-12);
    }

    #[test]
    fn rot6d_decode_is_scale_invariant(seed in 0u64..500, s in 0.1f64..10.0, t in 0.1f64..10.0) {
        let mut r = rng(seed);
        let a = random_point(&mut r, 1.0) + Vec3::new(1.5, 0.0, 0.0);
        let b = random_point(&mut r, 1.0) + Vec3::new(0.0, 1.5, 0.0);
        let m1 = rot6d_to_matrix(&[a.x, a.y, a.z, b.x, b.y, b.z]).unwrap();
        let m2 = rot6d_to_matrix(&[s * a.x, s * a.y, s * a.z, t * b.x, t * b.y, t * b.z]).unwrap();
        prop_assert!((m1 - m2).abs().max() < 1e-12);
        prop_assert!((m1.transpose() * m1 - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((m1.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bone_lengths_are_preserved(seed in 0u64..500) {
        let skeleton = Skeleton::default_body();
        let mut r = rng(seed);
        let joints = skeleton.forward_kinematics(&random_pose(&skeleton, &mut r)).unwrap();
        for (j, joint) in skeleton.joints.iter().enumerate().skip(1) {
            let len = (joints[j] - joints[joint.parent.unwrap()]).norm();
            prop_assert!((len - Vec3::from(joint.offset).norm()).abs() < 1e-12);
        }
    }
}
