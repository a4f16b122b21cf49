use std::path::Path;
use std::process::{Command, Output};

use mdkit::body::{MotionSequence, Pose, Skeleton};
use mdkit::geometry::obj::write_obj;
use mdkit::geometry::{SdfVolume, TriangleMesh, Vec3};
use mdkit::mutual::DistanceSequence;

fn mdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdkit")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn basis_writes_points_on_the_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let run = mdkit(&["basis", "--count", "150", "--radius", "2.0", "-o", path(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,x,y,z"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 150);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0] as usize, i);
        assert!(((r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt() - 2.0).abs() < 1e-9);
    }
}

#[test]
fn missing_mesh_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = mdkit(&["voxelize", "missing.obj", "--res", "16", "-o", path(&dir.path().join("v.mdsf"))]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("missing.obj"));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(mdkit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mdkit(&["basis", "--count", "many", "-o", "x.csv"]).status.code(), Some(2));
}

#[test]
fn selftest_reports_every_suite() {
    let run = mdkit(&["selftest"]);
    assert_eq!(run.status.code(), Some(0));
    let text = String::from_utf8_lossy(&run.stdout);
    for suite in ["dct-roundtrip", "bvh-oracle", "gradients"] {
        assert!(text.lines().any(|l| l.contains(suite) && l.contains("PASS")), "{text}");
    }
}

#[test]
fn voxelize_then_distances() {
    let dir = tempfile::tempdir().unwrap();
    let mesh_path = dir.path().join("room.obj");
    let mesh = TriangleMesh::merge(&[
        TriangleMesh::cuboid(Vec3::new(-3.0, -3.0, -0.5), Vec3::new(3.0, 3.0, 0.0)).unwrap(),
        TriangleMesh::cuboid(Vec3::new(0.5, -0.3, 0.0), Vec3::new(1.0, 0.3, 0.5)).unwrap(),
    ])
    .unwrap();
    write_obj(&mesh, std::fs::File::create(&mesh_path).unwrap()).unwrap();
    let vol_path = dir.path().join("room.mdsf");
    let run = mdkit(&["voxelize", path(&mesh_path), "--res", "32", "--crop-center", "0,0,1", "--crop-radius", "2", "-o", path(&vol_path)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let vol = SdfVolume::load(&vol_path).unwrap();
    assert_eq!(vol.spec().resolution, 32);
    assert!((vol.sample(&Vec3::new(-1.0, 0.5, 0.4)) - 0.4).abs() < 1e-6);

    let skeleton = Skeleton::default_body();
    let frames = (0..3)
        .map(|i| {
            let mut p = Pose::rest(&skeleton);
            p.translation = Vec3::new(-0.5 + 0.1 * i as f64, 0.0, 1.0);
            p
        })
        .collect();
    let motion_path = dir.path().join("walk.mdms");
    MotionSequence { frames, fps: 30.0 }.save(&motion_path).unwrap();
    let csv = dir.path().join("d.csv");
    let run = mdkit(&["distances", path(&vol_path), path(&motion_path), "--basis-count", "20", "-o", path(&csv)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("frame,kind,index,value"));
    assert_eq!(text.lines().count(), 1 + 3 * (67 + 20));
    let bin = dir.path().join("d.mdds");
    assert_eq!(mdkit(&["distances", path(&vol_path), path(&motion_path), "--basis-count", "20", "-o", path(&bin)]).status.code(), Some(0));
    let seq = DistanceSequence::load(&bin).unwrap();
    assert_eq!((seq.len(), seq.marker_count(), seq.basis_count()), (3, 67, 20));
}

#[test]
fn eval_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let run = mdkit(&["eval", "--ckpt", path(dir.path()), "--data", path(dir.path()), "-o", path(&dir.path().join("m.csv"))]);
    assert_ne!(run.status.code(), Some(0));
    assert!(!run.stderr.is_empty());
}
