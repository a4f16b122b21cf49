mod common;

use common::{brute_force_distance, random_point, rng, winding_number};
use mdkit::body::{MotionSequence, Pose, Skeleton, SurfaceSampler, DEFAULT_SURFACE_DENSITY};
use mdkit::geometry::{voxelize_sdf, GridSpec, SdfVolume, TriangleMesh, Vec3};
use mdkit::mutual::{fibonacci_basis, per_basis_distance, per_vertex_signed_distance, sequence_distances, DistanceSequence};
use proptest::prelude::*;

/// Smallest pairwise great-circle distance of the default 150-point basis at radius 2.
const FROZEN_MIN_SEPARATION: f64 = 0.506_092_980_490;

fn floor_volume() -> SdfVolume {
    let slab = TriangleMesh::cuboid(Vec3::new(-6.0, -6.0, -0.5), Vec3::new(6.0, 6.0, 0.0)).unwrap();
    voxelize_sdf(&slab, GridSpec::new(Vec3::new(-3.0, -3.0, -1.0), 0.125, 48).unwrap()).unwrap()
}

fn min_separation(points: &[Vec3], radius: f64) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let cos = (points[i].dot(&points[j]) / (radius * radius)).clamp(-1.0, 1.0);
            best = best.min(radius * cos.acos());
        }
    }
    best
}

#[test]
fn basis_spacing_is_near_uniform() {
    let basis = fibonacci_basis(150, 2.0).unwrap();
    let sep = min_separation(&basis.points, 2.0);
    let ideal = (4.0 * std::f64::consts::PI / 150.0).sqrt() * 2.0;
    assert!(sep >= 0.6 * ideal, "{sep} < 0.6 × {ideal}");
    assert!((sep - FROZEN_MIN_SEPARATION).abs() < 1e-9);
}

#[test]
fn marker_above_floor_reads_its_height() {
    let vol = floor_volume();
    let d = per_vertex_signed_distance(&vol, &[Vec3::new(0.3, -0.2, 0.30), Vec3::new(-1.1, 0.7, 1.05)]);
    assert!((d[0] - 0.30).abs() < 1e-3);
    assert!((d[1] - 1.05).abs() < 1e-3);
}

#[test]
fn per_vertex_matches_exact_mesh_distance() {
    let mesh = TriangleMesh::merge(&[
        TriangleMesh::cuboid(Vec3::new(-2.0, -2.0, -0.5), Vec3::new(2.0, 2.0, 0.0)).unwrap(),
        TriangleMesh::cuboid(Vec3::new(0.2, -0.4, 0.0), Vec3::new(0.8, 0.4, 0.45)).unwrap(),
        TriangleMesh::icosphere(Vec3::new(-0.6, 0.5, 0.4), 0.3, 3).unwrap(),
    ])
    .unwrap();
    let h = 0.05;
    let vol = voxelize_sdf(&mesh, GridSpec::new(Vec3::new(-1.2, -1.2, -0.4), h, 48).unwrap()).unwrap();
    let tolerance = 3f64.sqrt() / 2.0 * h;
    let mut r = rng(30);
    let markers: Vec<Vec3> = (0..400).map(|_| Vec3::new(0.0, 0.0, 0.5) + random_point(&mut r, 0.9)).collect();
    let d = per_vertex_signed_distance(&vol, &markers);
    for (m, v) in markers.iter().zip(&d) {
        let inside = winding_number(&mesh, m) > 0.5;
        let exact = if inside { -1.0 } else { 1.0 } * brute_force_distance(&mesh, m);
        assert!((v - exact).abs() <= tolerance, "marker {m:?}: {v} vs {exact}");
    }
}

#[test]
fn per_basis_is_exhaustive_minimum() {
    let skeleton = Skeleton::default_body();
    let sampler = SurfaceSampler::new(&skeleton, DEFAULT_SURFACE_DENSITY).unwrap();
    let mut pose = Pose::rest(&skeleton);
    pose.translation = Vec3::new(0.3, -0.1, 0.9);
    pose.local[3] = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
    let surface = sampler.pose(&skeleton, &pose).unwrap();
    let basis = fibonacci_basis(150, 2.0).unwrap().translated(&Vec3::new(0.0, 0.0, 0.9));
    let b = per_basis_distance(&basis, &surface.points).unwrap();
    for (p, v) in basis.points.iter().zip(&b) {
        let exact = surface.points.iter().map(|s| (s - p).norm()).fold(f64::INFINITY, f64::min);
        assert_eq!(*v, exact);
    }
}

#[test]
fn sphere_body_basis_distance() {
    let skeleton = Skeleton {
        joints: vec![mdkit::body::Joint { name: "c".into(), parent: None, offset: [0.0; 3] }],
        bones: vec![mdkit::body::Bone { joint: 0, tip: [0.0; 3], radius: 0.3 }],
        markers: vec![],
    };
    let sampler = SurfaceSampler::new(&skeleton, 2000.0).unwrap();
    let mut pose = Pose::rest(&skeleton);
    pose.translation = Vec3::new(0.2, 0.1, 1.0);
    let surface = sampler.pose(&skeleton, &pose).unwrap();
    let basis = fibonacci_basis(30, 1.5).unwrap();
    let b = per_basis_distance(&basis, &surface.points).unwrap();
    let spacing = 1.0 / 2000f64.sqrt();
    for (p, v) in basis.points.iter().zip(&b) {
        let exact = ((p - pose.translation).norm() - 0.3).max(0.0);
        assert!((v - exact).abs() <= 2.0 * spacing);
    }
}

#[test]
fn horizontal_slide_keeps_marker_distances() {
    let vol = floor_volume();
    let skeleton = Skeleton::default_body();
    let sampler = SurfaceSampler::new(&skeleton, DEFAULT_SURFACE_DENSITY).unwrap();
    let basis = fibonacci_basis(150, 2.0).unwrap();
    let frames = (0..6)
        .map(|i| {
            let mut p = Pose::rest(&skeleton);
            p.translation = Vec3::new(0.1 * i as f64, 0.0, 1.0);
            p
        })
        .collect();
    let seq = sequence_distances(&vol, &basis, &skeleton, &sampler, &MotionSequence { frames, fps: 30.0 }).unwrap();
    for f in 1..seq.len() {
        for (a, b) in seq.d[0].iter().zip(&seq.d[f]) {
            assert!((a - b).abs() < 1e-6);
        }
    }
    let change = seq.b[0].iter().zip(&seq.b[5]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(change > 0.1);
}

#[test]
fn sequence_equals_per_frame_calls() {
    let vol = floor_volume();
    let skeleton = Skeleton::default_body();
    let sampler = SurfaceSampler::new(&skeleton, 300.0).unwrap();
    let basis = fibonacci_basis(40, 1.0).unwrap();
    let mut r = rng(31);
    let frames: Vec<Pose> = (0..3)
        .map(|_| {
            let mut p = Pose::rest(&skeleton);
            p.translation = Vec3::new(0.0, 0.0, 1.0) + random_point(&mut r, 0.3);
            p
        })
        .collect();
    let seq = sequence_distances(&vol, &basis, &skeleton, &sampler, &MotionSequence { frames: frames.clone(), fps: 30.0 }).unwrap();
    for (f, pose) in frames.iter().enumerate() {
        let markers = skeleton.marker_vertices(pose).unwrap();
        assert_eq!(seq.d[f], per_vertex_signed_distance(&vol, &markers));
        let surface = sampler.pose(&skeleton, pose).unwrap();
        assert_eq!(seq.b[f], per_basis_distance(&basis, &surface.points).unwrap());
    }
}

#[test]
fn csv_layout() {
    let seq = DistanceSequence { d: vec![vec![0.5, -0.25], vec![1.0, 2.0]], b: vec![vec![3.0], vec![4.5]] };
    let mut buf = Vec::new();
    seq.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "frame,kind,index,value");
    assert_eq!(&lines[1..4], ["0,d,0,0.5", "0,d,1,-0.25", "0,b,0,3"]);
    assert_eq!(lines.len(), 1 + 2 * 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mdds_round_trip_is_f32_exact(frames in 1usize..5, k in 1usize..6, p in 1usize..6, seed in 0u64..1000) {
        let mut r = rng(seed);
        let mut seq = DistanceSequence {
            d: (0..frames).map(|_| (0..k).map(|_| random_point(&mut r, 2.0).x).collect()).collect(),
            b: (0..frames).map(|_| (0..p).map(|_| random_point(&mut r, 2.0).y.abs()).collect()).collect(),
        };
        seq.quantize_f32();
        let mut buf = Vec::new();
        seq.write_to(&mut buf).unwrap();
        prop_assert_eq!(DistanceSequence::read_from(buf.as_slice()).unwrap(), seq);
    }

    #[test]
    fn basis_points_lie_on_sphere(count in 1usize..400, radius in 0.1f64..5.0) {
        let basis = fibonacci_basis(count, radius).unwrap();
        prop_assert_eq!(basis.len(), count);
        for q in &basis.points {
            prop_assert!((q.norm() - radius).abs() < 1e-12 * radius.max(1.0));
        }
    }

    #[test]
    fn basis_distances_are_nonnegative_and_tight(seed in 0u64..300) {
        let mut r = rng(seed);
        let cloud: Vec<Vec3> = (0..60).map(|_| random_point(&mut r, 1.0)).collect();
        let basis = fibonacci_basis(20, 1.5).unwrap();
        let b = per_basis_distance(&basis, &cloud).unwrap();
        for (q, v) in basis.points.iter().zip(&b) {
            prop_assert!(*v >= 0.0);
            prop_assert!(cloud.iter().any(|c| (c - q).norm() == *v));
        }
    }
}
