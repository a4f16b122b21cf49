//! The `mdkit` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, MinMode, Tensor};
use crate::body::{BodyError, MotionSequence, Skeleton, SurfaceSampler, DEFAULT_SURFACE_DENSITY};
use crate::geometry::obj::load_obj;
use crate::geometry::{closest_point_on_triangle, voxelize_sdf, Bvh, GeometryError, GridSpec, SdfVolume, TriangleMesh, Vec3};
use crate::mutual::{fibonacci_basis, sequence_distances, MutualError, DEFAULT_BASIS_COUNT, DEFAULT_BASIS_RADIUS};
use crate::nets::{Model, NetError, Variant};
use crate::spectral::{DctBasis, SpectralError};
use crate::training::{evaluate, generate_synthetic, train_stagewise, Dataset, Split, SynthConfig, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("SelfTestFailed: {0} suite(s) failed")]
    SelfTestFailed(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Mutual(#[from] MutualError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mdkit", version, about = "Scene-aware motion forecasting through human/scene mutual distances")]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Voxelize a watertight OBJ mesh into a signed distance volume (MDSF).
    Voxelize(VoxelizeArgs),
    /// Write Fibonacci basis points as CSV (index,x,y,z).
    Basis(BasisArgs),
    /// Per-marker and per-basis distances of a motion inside a scene volume.
    Distances(DistancesArgs),
    /// Generate the synthetic dataset.
    Synth(SynthArgs),
    /// Stage-wise training; writes checkpoints, the resolved config and a JSON-lines log.
    Train(TrainArgs),
    /// Evaluate a trained checkpoint on a split; writes metrics CSV and prints a table.
    Eval(EvalArgs),
    /// Quick DCT, BVH and gradient checks.
    Selftest,
}

#[derive(Args, Debug)]
struct VoxelizeArgs {
    mesh: PathBuf,
    /// Voxels per axis.
    #[arg(long, default_value_t = 64)]
    res: usize,
    /// Grid center `x,y,z` in mesh coordinates (default: center of the mesh bounds).
    #[arg(long, value_parser = parse_point)]
    crop_center: Option<Vec3>,
    /// Half extent of the cubic grid in meters (default: bounds half-size plus 5% and two voxels).
    #[arg(long)]
    crop_radius: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct BasisArgs {
    #[arg(long, default_value_t = DEFAULT_BASIS_COUNT)]
    count: usize,
    /// Sphere radius in meters.
    #[arg(long, default_value_t = DEFAULT_BASIS_RADIUS)]
    radius: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DistancesArgs {
    scene: PathBuf,
    motion: PathBuf,
    /// Skeleton JSON (default: built-in capsule body).
    #[arg(long)]
    skeleton: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BASIS_COUNT)]
    basis_count: usize,
    #[arg(long, default_value_t = DEFAULT_BASIS_RADIUS)]
    basis_radius: f64,
    /// Body surface samples per square meter.
    #[arg(long, default_value_t = DEFAULT_SURFACE_DENSITY)]
    density: f64,
    /// Output path; `.csv` writes frame,kind,index,value rows, anything else MDDS.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON overriding the default generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of training sequences (overrides the config).
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test_seen: Option<usize>,
    #[arg(long)]
    test_unseen: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON overriding the default training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// `full` or `motion-only` (overrides the config).
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// `train`, `test-seen` or `test-unseen`.
    #[arg(long, default_value = "test-unseen", value_parser = parse_split)]
    split: Split,
    /// Checkpoint file inside `--ckpt`.
    #[arg(long, default_value = "fused.mdck")]
    checkpoint: String,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_point(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok(Vec3::new(*x, *y, *z)),
        _ => Err("expected three finite numbers x,y,z".into()),
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s {
        "full" => Ok(Variant::Full),
        "motion-only" => Ok(Variant::MotionOnly),
        _ => Err("expected full or motion-only".into()),
    }
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| "expected train, test-seen or test-unseen".into())
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file {} does not exist", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input directory {} does not exist", path.display())))
    }
}

fn read_json_file(path: &Path) -> Result<String, CliError> {
    require_file(path)?;
    Ok(std::fs::read_to_string(path)?)
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(std::io::stdout(), "{e}");
            } else {
                let _ = write!(std::io::stderr(), "{e}");
            }
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Voxelize(a) => voxelize(a),
        Command::Basis(a) => basis(a),
        Command::Distances(a) => distances(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Selftest => selftest(),
    }
}

fn voxelize(a: VoxelizeArgs) -> Result<(), CliError> {
    require_file(&a.mesh)?;
    if a.res < 2 {
        return Err(CliError::Usage("--res must be at least 2".into()));
    }
    if a.crop_radius.is_some_and(|r| !(r > 0.0)) {
        return Err(CliError::Usage("--crop-radius must be positive".into()));
    }
    let mesh = load_obj(&a.mesh)?;
    let (lo, hi) = mesh.bounds();
    let center = a.crop_center.unwrap_or((lo + hi) * 0.5);
    let radius = a.crop_radius.unwrap_or_else(|| {
        let half = (hi - lo).max() * 0.5 * 1.05;
        half * a.res as f64 / (a.res as f64 - 4.0).max(1.0)
    });
    let volume = voxelize_sdf(&mesh, GridSpec::centered(center, radius, a.res)?)?;
    volume.save(&a.output)?;
    eprintln!("wrote {} ({}^3 voxels of {:.4} m)", a.output.display(), a.res, volume.spec().voxel_size);
    Ok(())
}

fn basis(a: BasisArgs) -> Result<(), CliError> {
    let set = fibonacci_basis(a.count, a.radius)?;
    let mut out = String::from("index,x,y,z\n");
    for (i, p) in set.points.iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", p.x, p.y, p.z));
    }
    std::fs::write(&a.output, out)?;
    Ok(())
}

fn distances(a: DistancesArgs) -> Result<(), CliError> {
    require_file(&a.scene)?;
    require_file(&a.motion)?;
    if let Some(s) = &a.skeleton {
        require_file(s)?;
    }
    let volume = SdfVolume::load(&a.scene)?;
    let motion = MotionSequence::load(&a.motion)?;
    let skeleton = match &a.skeleton {
        Some(p) => Skeleton::load(p)?,
        None => Skeleton::default_body(),
    };
    let basis = fibonacci_basis(a.basis_count, a.basis_radius)?;
    let sampler = SurfaceSampler::new(&skeleton, a.density)?;
    let seq = sequence_distances(&volume, &basis, &skeleton, &sampler, &motion)?;
    if a.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let mut buf = Vec::new();
        seq.write_csv(&mut buf)?;
        std::fs::write(&a.output, buf)?;
    } else {
        seq.save(&a.output)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<SynthConfig>(&read_json_file(p)?).map_err(|e| CliError::Usage(format!("bad synth config: {e}")))?,
        None => SynthConfig::default(),
    };
    if let Some(n) = a.train {
        cfg.train = n;
    }
    if let Some(n) = a.test_seen {
        cfg.test_seen = n;
    }
    if let Some(n) = a.test_unseen {
        cfg.test_unseen = n;
    }
    let data = generate_synthetic(&cfg, a.seed)?;
    data.save(&a.out)?;
    eprintln!("wrote {} sequences over {} layouts to {}", data.samples.len(), data.layouts.len(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    require_dir(&a.data)?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_json(&read_json_file(p)?).map_err(|e| CliError::Usage(format!("bad train config: {e}")))?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(v) = a.variant {
        cfg.model.variant = v;
    }
    let data = Dataset::load(&a.data)?;
    let out = train_stagewise(&data, &cfg, Some(&a.out))?;
    if let Some(last) = out.log.last() {
        eprintln!("trained {} epochs; final loss {:.6}", out.log.len(), last.loss);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    require_dir(&a.ckpt)?;
    require_dir(&a.data)?;
    let cfg = TrainConfig::from_json(&read_json_file(&a.ckpt.join("train_config.json"))?)?;
    let ckpt = a.ckpt.join(&a.checkpoint);
    require_file(&ckpt)?;
    let model = Model::load(cfg.model.clone(), &ckpt)?;
    let data = Dataset::load(&a.data)?;
    let report = evaluate(&model, &data, a.split, cfg.batch_size)?;
    std::fs::write(&a.output, report.table.to_csv())?;
    println!("{} ({})", a.split.name(), a.checkpoint);
    print!("{}", report.table.pretty());
    Ok(())
}

struct SuiteResult {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn suite_dct() -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_orth: f64 = 0.0;
    let mut worst_round: f64 = 0.0;
    for len in 1..=90 {
        let basis = DctBasis::new(len).expect("positive length");
        let c = Tensor::from_vec(len, len, basis.matrix().to_vec());
        let cct = c.matmul(&c.transpose());
        for i in 0..len {
            for j in 0..len {
                worst_orth = worst_orth.max((cct.get(i, j) - f64::from(u8::from(i == j))).abs());
            }
        }
        for _ in 0..10 {
            let x: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let back = basis.inverse(&basis.forward(&x).expect("length")).expect("length");
            worst_round = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(worst_round, f64::max);
        }
    }
    SuiteResult {
        name: "dct-roundtrip",
        pass: worst_orth < 1e-10 && worst_round < 1e-9,
        detail: format!("max |CCt-I| {worst_orth:.1e}, max round-trip error {worst_round:.1e}"),
    }
}

fn suite_bvh() -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let parts = [
        TriangleMesh::icosphere(Vec3::new(0.2, -0.1, 0.3), 0.7, 3),
        TriangleMesh::cuboid(Vec3::new(-1.0, -0.4, -0.9), Vec3::new(-0.3, 0.5, -0.2)),
    ];
    let mesh = match parts.into_iter().collect::<Result<Vec<_>, _>>().and_then(|p| TriangleMesh::merge(&p)) {
        Ok(m) => m,
        Err(e) => return SuiteResult { name: "bvh-oracle", pass: false, detail: e.to_string() },
    };
    let bvh = match Bvh::build(&mesh) {
        Ok(b) => b,
        Err(e) => return SuiteResult { name: "bvh-oracle", pass: false, detail: e.to_string() },
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let q = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let brute = (0..mesh.len())
            .map(|t| {
                let [a, b, c] = mesh.triangle(t);
                (closest_point_on_triangle(&q, &a, &b, &c) - q).norm()
            })
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((bvh.closest_point(&q).distance - brute).abs());
    }
    SuiteResult { name: "bvh-oracle", pass: worst < 1e-9, detail: format!("{} triangles, max |bvh-brute| {worst:.1e} m", mesh.len()) }
}

/// Central-difference check of `sum(w ⊙ f(x))` for a random weight `w`.
fn fd_error(x0: &Tensor, f: &dyn Fn(&mut Graph, crate::autodiff::Var) -> crate::autodiff::Var) -> f64 {
    let mut g = Graph::new();
    let x = g.input(x0.clone());
    let y = f(&mut g, x);
    let (r, c) = g.shape(y);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = Tensor::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0));
    let probe = g.weighted_sum(y, &w);
    let grads = g.backward(probe).expect("scalar probe");
    let analytic = grads.get(x).cloned().unwrap_or_else(|| Tensor::zeros(x0.rows, x0.cols));
    let eval = |t: &Tensor| {
        let mut g = Graph::new();
        let x = g.constant(t.clone());
        let y = f(&mut g, x);
        g.value(y).data.iter().zip(&w.data).map(|(a, b)| a * b).sum::<f64>()
    };
    let h = 1e-6;
    let mut num = Vec::with_capacity(x0.data.len());
    for i in 0..x0.data.len() {
        let (mut plus, mut minus) = (x0.clone(), x0.clone());
        plus.data[i] += h;
        minus.data[i] -= h;
        num.push((eval(&plus) - eval(&minus)) / (2.0 * h));
    }
    let diff: f64 = num.iter().zip(&analytic.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = num.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn suite_gradients() -> SuiteResult {
    let skeleton = Arc::new(Skeleton::default_body());
    let markers = Arc::new(skeleton.marker_template());
    let sphere = TriangleMesh::icosphere(Vec3::zeros(), 0.6, 2).and_then(|m| voxelize_sdf(&m, GridSpec::centered(Vec3::zeros(), 1.2, 8)?));
    let volume = match sphere {
        Ok(v) => Arc::new(v),
        Err(e) => return SuiteResult { name: "gradients", pass: false, detail: e.to_string() },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pose = crate::body::Pose::rest(&skeleton).to_vector();
    for v in pose.iter_mut() {
        *v += rng.gen_range(-0.2..0.2);
    }
    let poses = Tensor::from_vec(1, pose.len(), pose);
    let points = Tensor::from_fn(2, 12, |_, _| rng.gen_range(-0.9..0.9));
    let basis = Arc::new(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, -1.0, 0.5), Vec3::new(0.3, 0.3, 0.3)]);
    let checks: Vec<(&str, f64)> = vec![
        ("forward-kinematics", fd_error(&poses, &|g, x| {
            let fk = g.forward_kinematics(x, skeleton.clone());
            g.rigid_points(fk, markers.clone())
        })),
        ("sdf-sample", fd_error(&points, &|g, x| g.sdf_sample(x, vec![volume.clone(); 2]))),
        ("smooth-min", fd_error(&points, &|g, x| g.soft_min_distance(x, basis.clone(), 0.05, 40.0, MinMode::Smooth))),
    ];
    let worst = checks.iter().map(|c| c.1).fold(0.0, f64::max);
    let detail = checks.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    SuiteResult { name: "gradients", pass: worst < 1e-4, detail }
}

fn selftest() -> Result<(), CliError> {
    let results = [suite_dct(), suite_bvh(), suite_gradients()];
    let mut failed = 0;
    for r in &results {
        println!("{} {}: {}", if r.pass { "PASS" } else { "FAIL" }, r.name, r.detail);
        failed += usize::from(!r.pass);
    }
    if failed > 0 {
        return Err(CliError::SelfTestFailed(failed));
    }
    Ok(())
}
