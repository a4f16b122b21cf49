mod common;

use common::{random_tensor, rng, standing_pose, MotionFixture};
use mdkit::autodiff::Graph;
use mdkit::body::{MotionSequence, Pose, Skeleton};
use mdkit::geometry::Vec3;
use mdkit::training::{
    freeze_baseline, generate_synthetic, loss_dist, loss_dist_reference, path_pose_error, Dataset, FrameErrors, Metrics, MotionKind, Split,
    SynthConfig, TrainConfig,
};
use proptest::prelude::*;
use rand::Rng;

fn small_synth() -> SynthConfig {
    SynthConfig { train: 6, test_seen: 3, test_unseen: 2, train_layouts: 2, unseen_layouts: 1, ..SynthConfig::default() }
}

fn small_dataset() -> &'static Dataset {
    static DATA: std::sync::OnceLock<Dataset> = std::sync::OnceLock::new();
    DATA.get_or_init(|| generate_synthetic(&small_synth(), 3).unwrap())
}

#[test]
fn loss_dist_matches_loop_oracle() {
    let mut r = rng(50);
    let (k, p, l) = (5, 7, 9);
    let tables: Vec<_> = [k, p, k, p].iter().map(|&n| random_tensor(&mut r, n, l, 2.0)).collect();
    let mut oracle = 0.0;
    for (a, b, n) in [(&tables[0], &tables[2], k), (&tables[1], &tables[3], p)] {
        let mut s = 0.0;
        for i in 0..n {
            for t in 0..l {
                s += (a.get(i, t) - b.get(i, t)).abs();
            }
        }
        oracle += s / n as f64;
    }
    oracle /= l as f64;
    let mut g = Graph::new();
    let v: Vec<_> = tables.iter().map(|t| g.constant(t.clone())).collect();
    let loss = loss_dist(&mut g, v[0], v[1], v[2], v[3]).unwrap();
    assert!((g.value(loss).data[0] - oracle).abs() < 1e-12);

    let rows = |t: &mdkit::autodiff::Tensor| (0..t.rows).map(|r| (0..l).map(|c| t.get(r, c)).collect::<Vec<f64>>()).collect::<Vec<_>>();
    let reference = loss_dist_reference(&rows(&tables[0]), &rows(&tables[1]), &rows(&tables[2]), &rows(&tables[3])).unwrap();
    assert!((reference - oracle).abs() < 1e-12);
}

#[test]
fn perfect_prediction_has_zero_losses() {
    let fx = MotionFixture::new();
    let poses = vec![standing_pose(&fx.skeleton, 0.0), standing_pose(&fx.skeleton, 0.05)];
    let (d, b): (Vec<_>, Vec<_>) = poses.iter().map(|p| fx.distances(p)).unzip();
    let (comps, total) = fx.evaluate(&poses, &poses, &d, &b);
    assert_eq!(comps[0], 0.0);
    assert_eq!(comps[1], 0.0);
    assert!(comps[2].abs() < 1e-12 && comps[3].abs() < 1e-12, "{comps:?}");
    assert!(total.abs() < 1e-12);
    let mut g = Graph::new();
    let z = g.constant(mdkit::autodiff::Tensor::from_vec(2, 3, vec![0.3; 6]));
    let l = loss_dist(&mut g, z, z, z, z).unwrap();
    assert_eq!(g.value(l).data[0], 0.0);
}

#[test]
fn horizontal_offset_on_floor() {
    let fx = MotionFixture::new();
    let target = standing_pose(&fx.skeleton, 0.0);
    let mut predicted = target.clone();
    predicted.translation += Vec3::new(0.01, 0.0, 0.0);
    let (d, b) = fx.distances(&target);
    let (comps, _) = fx.evaluate(&[predicted], &[target], &[d], &[b]);
    assert!((comps[0] - 0.01).abs() < 1e-12, "{comps:?}");
    assert_eq!(comps[1], 0.0);
    assert!(comps[2].abs() < 1e-9, "{comps:?}");
    assert!(comps[3] > 0.0);
}

fn loop_errors(skeleton: &Skeleton, predicted: &[Pose], truth: &[Pose]) -> FrameErrors {
    let mut out = FrameErrors { path_mm: vec![], pose_mm: vec![] };
    for (p, t) in predicted.iter().zip(truth) {
        let dt = p.translation - t.translation;
        out.path_mm.push(1000.0 * (dt.x * dt.x + dt.y * dt.y + dt.z * dt.z).sqrt());
        let (mut p0, mut t0) = (p.clone(), t.clone());
        p0.translation = Vec3::zeros();
        t0.translation = Vec3::zeros();
        let (jp, jt) = (skeleton.forward_kinematics(&p0).unwrap(), skeleton.forward_kinematics(&t0).unwrap());
        let mut s = 0.0;
        for j in 0..jp.len() {
            s += (jp[j] - jt[j]).norm();
        }
        out.pose_mm.push(1000.0 * s / jp.len() as f64);
    }
    out
}

fn jittered(skeleton: &Skeleton, r: &mut rand_chacha::ChaCha8Rng, frames: usize) -> (Vec<Pose>, Vec<Pose>) {
    let truth: Vec<Pose> = (0..frames).map(|i| standing_pose(skeleton, 0.02 * i as f64)).collect();
    let predicted = truth
        .iter()
        .map(|p| {
            let mut v = p.to_vector();
            for x in v.iter_mut() {
                *x += r.gen_range(-0.05..0.05);
            }
            Pose::from_vector(&v).unwrap()
        })
        .collect();
    (predicted, truth)
}

#[test]
fn metrics_match_loop_oracle() {
    let skeleton = Skeleton::default_body();
    let mut r = rng(51);
    let mut all = Vec::new();
    for _ in 0..4 {
        let (p, t) = jittered(&skeleton, &mut r, 30);
        let e = path_pose_error(&skeleton, &p, &t).unwrap();
        let o = loop_errors(&skeleton, &p, &t);
        for (a, b) in e.path_mm.iter().chain(&e.pose_mm).zip(o.path_mm.iter().chain(&o.pose_mm)) {
            assert!((a - b).abs() < 1e-9);
        }
        all.push(o);
    }
    let m = Metrics::aggregate(&all, &[15, 30], 30.0).unwrap();
    for (h, v) in [15, 30].iter().zip(&m.path_mm) {
        let o: f64 = all.iter().map(|e| e.path_mm[h - 1]).sum::<f64>() / 4.0;
        assert!((v - o).abs() < 1e-9);
    }
    let mean: f64 = all.iter().flat_map(|e| &e.pose_mm).sum::<f64>() / 120.0;
    assert!((m.pose_mean - mean).abs() < 1e-9);
    assert!(m.path_mm.iter().chain(&m.pose_mm).all(|v| *v >= 0.0));
}

#[test]
fn translation_offset_is_path_only() {
    let skeleton = Skeleton::default_body();
    let truth: Vec<Pose> = (0..30).map(|i| standing_pose(&skeleton, 0.01 * i as f64)).collect();
    let predicted: Vec<Pose> = truth
        .iter()
        .map(|p| {
            let mut q = p.clone();
            q.translation.x += 0.01;
            q
        })
        .collect();
    let e = path_pose_error(&skeleton, &predicted, &truth).unwrap();
    assert!(e.path_mm.iter().all(|v| (v - 10.0).abs() < 1e-9));
    assert!(e.pose_mm.iter().all(|v| v.abs() < 1e-9));
    let same = path_pose_error(&skeleton, &truth, &truth).unwrap();
    assert!(same.path_mm.iter().chain(&same.pose_mm).all(|v| *v == 0.0));
}

#[test]
fn synthetic_data_contract() {
    let cfg = small_synth();
    let data = small_dataset();
    assert_eq!(data.split(Split::Train).len(), cfg.train);
    assert_eq!(data.split(Split::TestSeen).len(), cfg.test_seen);
    assert_eq!(data.split(Split::TestUnseen).len(), cfg.test_unseen);
    for s in &data.samples {
        assert_eq!(s.motion.len(), cfg.frames());
        assert_eq!(s.motion.fps, 30.0);
        assert_eq!(s.distances.len(), cfg.frames());
        assert_eq!(s.distances.marker_count(), 67);
        assert_eq!(s.distances.basis_count(), 150);
        let volume = &data.layouts[s.layout].volume;
        for pose in &s.motion.frames {
            let world = {
                let mut p = pose.clone();
                p.translation += s.center;
                p
            };
            for m in data.skeleton.marker_vertices(&world).unwrap() {
                assert!(volume.sample(&m) >= -0.01, "marker penetrates at {m:?}");
            }
        }
    }
}

#[test]
fn synthetic_generation_is_deterministic() {
    let again = generate_synthetic(&small_synth(), 3).unwrap();
    let data = small_dataset();
    assert_eq!(again.samples, data.samples);
    for (a, b) in again.layouts.iter().zip(&data.layouts) {
        assert_eq!(a.spec, b.spec);
        assert_eq!(a.volume.values(), b.volume.values());
    }
    let other = generate_synthetic(&SynthConfig { train: 2, test_seen: 0, test_unseen: 0, ..small_synth() }, 4).unwrap();
    assert_ne!(other.samples[0].motion, data.samples[0].motion);
}

#[test]
fn dataset_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset();
    data.save(dir.path()).unwrap();
    let back = Dataset::load(dir.path()).unwrap();
    assert_eq!(back.samples, data.samples);
    assert_eq!(back.skeleton, data.skeleton);
    assert_eq!(back.config, data.config);
    for (a, b) in back.layouts.iter().zip(&data.layouts) {
        assert_eq!(a.volume.values(), b.volume.values());
    }
}

#[test]
fn freeze_error_grows_on_walks() {
    let cfg = SynthConfig { train: 0, test_seen: 12, test_unseen: 0, train_layouts: 2, unseen_layouts: 0, ..SynthConfig::default() };
    let data = generate_synthetic(&cfg, 5).unwrap();
    let walks: Vec<_> = data.samples.iter().filter(|s| s.kind == MotionKind::WalkAround).collect();
    assert!(!walks.is_empty());
    let errors = freeze_baseline(&data, &walks, cfg.history).unwrap();
    let m = Metrics::aggregate(&errors, &[5, 10, 15, 20, 25, 30], 30.0).unwrap();
    for w in m.path_mm.windows(2) {
        assert!(w[1] > w[0], "{:?}", m.path_mm);
    }
}

#[test]
fn learning_rate_schedule() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.lr_at(29), 0.0005);
    assert_eq!(cfg.lr_at(30), 0.00025);
    assert_eq!(cfg.lr_at(81), 0.00025);
}

#[test]
fn motion_file_round_trip() {
    let skeleton = Skeleton::default_body();
    let mut r = rng(52);
    let (frames, _) = jittered(&skeleton, &mut r, 7);
    let mut seq = MotionSequence { frames, fps: 30.0 };
    seq.quantize_f32();
    let mut buf = Vec::new();
    seq.write_to(&mut buf).unwrap();
    assert_eq!(MotionSequence::read_from(buf.as_slice()).unwrap(), seq);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_dist_is_nonnegative_and_symmetric(seed in 0u64..10_000, k in 1usize..5, p in 1usize..5, l in 1usize..6) {
        let mut r = rng(seed);
        let t: Vec<_> = (0..4).map(|i| random_tensor(&mut r, if i % 2 == 0 { k } else { p }, l, 1.0)).collect();
        let mut g = Graph::new();
        let v: Vec<_> = t.iter().map(|x| g.constant(x.clone())).collect();
        let ab = loss_dist(&mut g, v[0], v[1], v[2], v[3]).unwrap();
        let ba = loss_dist(&mut g, v[2], v[3], v[0], v[1]).unwrap();
        prop_assert!(g.value(ab).data[0] >= 0.0);
        prop_assert_eq!(g.value(ab).data[0], g.value(ba).data[0]);
    }

    #[test]
    fn weights_combine_linearly(c in prop::array::uniform4(0.0f64..10.0)) {
        let w = TrainConfig::default().weights;
        prop_assert!((w.combine(&c) - (c[0] + 0.5 * c[1] + c[2] + c[3])).abs() < 1e-12);
    }
}
