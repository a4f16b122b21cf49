//! Procedural rooms and kinematic human motions standing in for captured
//! human-scene interaction data.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::rotation::axis_angle;
use crate::body::{matrix_to_rot6d, MotionSequence, Pose, Rot6, Skeleton, SurfaceSampler, IDENTITY_6D};
use crate::geometry::{voxelize_sdf, GridSpec, SdfVolume, TriangleMesh, Vec3};
use crate::mutual::{fibonacci_basis, sequence_distances, BasisSet, DistanceSequence};

use super::TrainError;

type Vec2 = Vector2<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub train: usize,
    pub test_seen: usize,
    pub test_unseen: usize,
    pub train_layouts: usize,
    pub unseen_layouts: usize,
    pub history: usize,
    pub horizon: usize,
    pub fps: f64,
    pub basis_count: usize,
    pub basis_radius: f64,
    pub crop_radius: f64,
    pub voxel_size: f64,
    /// Half extent of the square room floor.
    pub room_half: f64,
    pub surface_density: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            train: 200,
            test_seen: 40,
            test_unseen: 20,
            train_layouts: 12,
            unseen_layouts: 4,
            history: 15,
            horizon: 30,
            fps: 30.0,
            basis_count: 150,
            basis_radius: 2.0,
            crop_radius: 2.0,
            voxel_size: 0.0625,
            room_half: 2.5,
            surface_density: crate::body::DEFAULT_SURFACE_DENSITY,
        }
    }
}

impl SynthConfig {
    pub fn frames(&self) -> usize {
        self.history + self.horizon
    }

    /// Crop edge length in voxels.
    pub fn crop_resolution(&self) -> usize {
        (2.0 * self.crop_radius / self.voxel_size).round() as usize
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.history == 0 || self.horizon == 0 {
            return bad("history and horizon must be positive");
        }
        if self.train_layouts == 0 || (self.test_unseen > 0 && self.unseen_layouts == 0) {
            return bad("every split needs at least one layout");
        }
        if !(self.voxel_size > 0.0 && self.crop_radius > 0.0 && self.basis_radius > 0.0 && self.fps > 0.0) {
            return bad("sizes and rates must be positive");
        }
        if self.room_half < 1.5 {
            return bad("room is too small for the motion generators");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    TestSeen,
    TestUnseen,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::TestSeen => "test-seen",
            Split::TestUnseen => "test-unseen",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        [Split::Train, Split::TestSeen, Split::TestUnseen].into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    WalkAround,
    SitDown,
    ReachWall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Obstacle {
    Box { min: [f64; 3], max: [f64; 3] },
    Cylinder { center: [f64; 2], radius: f64, height: f64 },
}

impl Obstacle {
    /// Signed distance from a floor point to the footprint.
    fn footprint_distance(&self, p: &Vec2) -> f64 {
        match self {
            Obstacle::Box { min, max } => {
                let c = Vec2::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1]));
                let half = Vec2::new(0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1]));
                let q = (p - c).abs() - half;
                let outside = Vec2::new(q.x.max(0.0), q.y.max(0.0)).norm();
                outside + q.x.max(q.y).min(0.0)
            }
            Obstacle::Cylinder { center, radius, .. } => (p - Vec2::new(center[0], center[1])).norm() - radius,
        }
    }

    fn center(&self) -> Vec2 {
        match self {
            Obstacle::Box { min, max } => Vec2::new(0.5 * (min[0] + max[0]), 0.5 * (min[1] + max[1])),
            Obstacle::Cylinder { center, .. } => Vec2::new(center[0], center[1]),
        }
    }

    /// Radius of the footprint's bounding circle.
    fn reach(&self) -> f64 {
        match self {
            Obstacle::Box { min, max } => 0.5 * Vec2::new(max[0] - min[0], max[1] - min[1]).norm(),
            Obstacle::Cylinder { radius, .. } => *radius,
        }
    }

    fn mesh(&self) -> TriangleMesh {
        match self {
            Obstacle::Box { min, max } => TriangleMesh::cuboid(Vec3::from(*min), Vec3::from(*max)),
            Obstacle::Cylinder { center, radius, height } => TriangleMesh::cylinder(Vec3::new(center[0], center[1], 0.0), *radius, *height, 24),
        }
        .expect("valid primitive")
    }
}

/// Room description: square floor slab, four walls, free-standing obstacles and a seat box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub half: f64,
    pub obstacles: Vec<Obstacle>,
    pub seat: Obstacle,
}

const WALL_THICKNESS: f64 = 0.2;
const WALL_HEIGHT: f64 = 2.5;
const FLOOR_DEPTH: f64 = 0.5;

impl LayoutSpec {
    pub fn mesh(&self) -> TriangleMesh {
        let (h, t) = (self.half, WALL_THICKNESS);
        let mut parts = vec![
            TriangleMesh::cuboid(Vec3::new(-h - t, -h - t, -FLOOR_DEPTH), Vec3::new(h + t, h + t, 0.0)),
            TriangleMesh::cuboid(Vec3::new(h, -h - t, 0.0), Vec3::new(h + t, h + t, WALL_HEIGHT)),
            TriangleMesh::cuboid(Vec3::new(-h - t, -h - t, 0.0), Vec3::new(-h, h + t, WALL_HEIGHT)),
            TriangleMesh::cuboid(Vec3::new(-h, h, 0.0), Vec3::new(h, h + t, WALL_HEIGHT)),
            TriangleMesh::cuboid(Vec3::new(-h, -h - t, 0.0), Vec3::new(h, -h, WALL_HEIGHT)),
        ]
        .into_iter()
        .map(|m| m.expect("valid wall"))
        .collect::<Vec<_>>();
        parts.extend(self.obstacles.iter().chain(std::iter::once(&self.seat)).map(Obstacle::mesh));
        TriangleMesh::merge(&parts).expect("non-empty room")
    }

    /// Grid covering the room with a quarter-meter margin; `z = 0` falls on a cell boundary.
    pub fn grid(&self, voxel: f64) -> GridSpec {
        let lo = ((self.half + 0.25) / voxel).ceil();
        let res = (2.0 * lo) as usize;
        let zlo = (0.75 / voxel).ceil();
        GridSpec::new(Vec3::new(-lo * voxel, -lo * voxel, -zlo * voxel), voxel, res).expect("valid room grid")
    }

    /// Signed clearance of a floor point: distance to the nearest wall or object footprint.
    fn clearance(&self, p: &Vec2, skip_seat: bool) -> f64 {
        let walls = self.half - p.x.abs().max(p.y.abs());
        let objects = self
            .obstacles
            .iter()
            .chain((!skip_seat).then_some(&self.seat))
            .map(|o| o.footprint_distance(p))
            .fold(f64::INFINITY, f64::min);
        walls.min(objects)
    }

    fn random(rng: &mut ChaCha8Rng, half: f64) -> Self {
        loop {
            let mut placed: Vec<Obstacle> = Vec::new();
            let seat_h = rng.gen_range(0.44..0.56);
            let seat_half = rng.gen_range(0.22..0.27);
            let seat_c = Vec2::new(rng.gen_range(-half + 0.9..half - 0.9), rng.gen_range(-half + 0.9..half - 0.9));
            let seat = Obstacle::Box {
                min: [seat_c.x - seat_half, seat_c.y - seat_half, 0.0],
                max: [seat_c.x + seat_half, seat_c.y + seat_half, seat_h],
            };
            let count = rng.gen_range(1..=3);
            let mut tries = 0;
            while placed.len() < count && tries < 100 {
                tries += 1;
                let c = Vec2::new(rng.gen_range(-half + 0.8..half - 0.8), rng.gen_range(-half + 0.8..half - 0.8));
                let candidate = if rng.gen_bool(0.5) {
                    let (hx, hy) = (rng.gen_range(0.15..0.4), rng.gen_range(0.15..0.4));
                    let height = rng.gen_range(0.6..1.3);
                    Obstacle::Box { min: [c.x - hx, c.y - hy, 0.0], max: [c.x + hx, c.y + hy, height] }
                } else {
                    Obstacle::Cylinder { center: [c.x, c.y], radius: rng.gen_range(0.15..0.35), height: rng.gen_range(0.6..1.3) }
                };
                let spaced = placed
                    .iter()
                    .chain(std::iter::once(&seat))
                    .all(|o| (o.center() - candidate.center()).norm() > o.reach() + candidate.reach() + 1.1);
                if spaced {
                    placed.push(candidate);
                }
            }
            if !placed.is_empty() {
                return Self { half, obstacles: placed, seat };
            }
        }
    }
}

/// A room with its voxelized signed distance field (world frame).
#[derive(Debug, Clone)]
pub struct Layout {
    pub spec: LayoutSpec,
    pub mesh: TriangleMesh,
    pub volume: Arc<SdfVolume>,
}

impl Layout {
    pub fn build(spec: LayoutSpec, voxel: f64) -> Result<Self, TrainError> {
        let mesh = spec.mesh();
        let mut volume = voxelize_sdf(&mesh, spec.grid(voxel))?;
        volume.quantize_f32();
        Ok(Self { spec, mesh, volume: Arc::new(volume) })
    }
}

/// One `T+U` window in the crop frame centered on the last observed root.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub split: Split,
    pub layout: usize,
    pub kind: MotionKind,
    /// World position of the crop origin.
    pub center: Vec3,
    pub motion: MotionSequence,
    pub distances: DistanceSequence,
}

/// Kinematic state of the procedural body at one instant.
#[derive(Debug, Clone, Copy)]
struct BodyState {
    pos: Vec2,
    yaw: f64,
    /// Gait phase in radians.
    phase: f64,
    /// Gait amplitude in `[0, 1]`.
    gait: f64,
    sit: f64,
    seat_height: f64,
    reach: f64,
}

const STRIDE: f64 = 1.3;
const STAND_HEIGHT: f64 = 0.975;
const PELVIS_RADIUS: f64 = 0.13;

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

fn axis_angle_6d(axis: Vec3, angle: f64) -> Rot6 {
    matrix_to_rot6d(&axis_angle(axis, angle)).expect("rotation matrix")
}

fn pose_from_state(s: &BodyState) -> Pose {
    let mut pose = Pose {
        translation: Vec3::zeros(),
        root: axis_angle_6d(Vec3::z(), s.yaw),
        local: vec![IDENTITY_6D; 15],
    };
    let (phi, a, sit) = (s.phase, s.gait * (1.0 - s.sit), s.sit);
    let ry = |angle: f64| axis_angle_6d(Vec3::y(), angle);
    let walk_z = STAND_HEIGHT + 0.015 * (2.0 * phi).cos() * a;
    let seated_z = s.seat_height + PELVIS_RADIUS;
    pose.translation = Vec3::new(s.pos.x, s.pos.y, walk_z + (seated_z - walk_z) * sit);
    pose.local[0] = ry(0.35 * (PI * sit).sin());
    let hip = |side: f64| a * 0.45 * side * phi.sin() + sit * FRAC_PI_2;
    let knee = |side: f64| a * 0.35 * (1.0 + (phi + if side > 0.0 { 1.2 } else { 1.2 + PI }).sin()) + sit * FRAC_PI_2;
    pose.local[9] = ry(-hip(1.0));
    pose.local[10] = ry(knee(1.0));
    pose.local[12] = ry(-hip(-1.0));
    pose.local[13] = ry(knee(-1.0));
    let swing = 0.35 * a * phi.sin();
    pose.local[3] = ry(swing);
    pose.local[4] = ry(-0.25);
    pose.local[6] = ry(-swing * (1.0 - s.reach) - 1.45 * s.reach);
    pose.local[7] = ry(-0.25 * (1.0 - s.reach));
    pose
}

/// Dense arclength-parametrized Catmull–Rom curve through waypoints.
struct Path {
    points: Vec<Vec2>,
    arc: Vec<f64>,
}

impl Path {
    fn through(way: &[Vec2]) -> Self {
        let mut points = Vec::new();
        let n = way.len();
        for i in 0..n - 1 {
            let p0 = if i == 0 { way[0] * 2.0 - way[1] } else { way[i - 1] };
            let (p1, p2) = (way[i], way[i + 1]);
            let p3 = if i + 2 < n { way[i + 2] } else { way[n - 1] * 2.0 - way[n - 2] };
            for k in 0..40 {
                let t = k as f64 / 40.0;
                let (t2, t3) = (t * t, t * t * t);
                points.push(
                    (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3) * 0.5,
                );
            }
        }
        points.push(way[n - 1]);
        let mut arc = vec![0.0];
        for w in points.windows(2) {
            arc.push(arc.last().unwrap() + (w[1] - w[0]).norm());
        }
        Self { points, arc }
    }

    fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Position and heading at arclength `s` (clamped to the curve).
    fn at(&self, s: f64) -> (Vec2, f64) {
        let s = s.clamp(0.0, self.length());
        let i = self.arc.partition_point(|&a| a <= s).clamp(1, self.points.len() - 1);
        let (a0, a1) = (self.arc[i - 1], self.arc[i]);
        let t = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        let d = self.points[i] - self.points[i - 1];
        (self.points[i - 1] + d * t, d.y.atan2(d.x))
    }

    fn min_clearance(&self, layout: &LayoutSpec, skip_seat: bool, from: f64, to: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.arc)
            .filter(|(_, &a)| a >= from && a <= to)
            .map(|(p, _)| layout.clearance(p, skip_seat))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Arclength covered after `t` seconds at speed `v`, decelerating uniformly
/// over the final `brake` meters of a path of length `len`.
fn braking_arclength(t: f64, v: f64, len: f64, brake: f64) -> (f64, f64) {
    let t1 = (len - brake) / v;
    if t <= t1 {
        return (v * t, v);
    }
    let td = 2.0 * brake / v;
    let dt = (t - t1).min(td);
    ((len - brake) + v * dt - v * dt * dt / (2.0 * td), v * (1.0 - dt / td))
}

/// Full timeline of one generated motion plus the time the observation ends.
struct Timeline {
    states: Vec<BodyState>,
    history_end: f64,
}

fn unit(angle: f64) -> Vec2 {
    Vec2::new(angle.cos(), angle.sin())
}

fn reach_wall(layout: &LayoutSpec, rng: &mut ChaCha8Rng, fps: f64) -> Option<Timeline> {
    let h = layout.half;
    let mut faces: Vec<(Vec2, Vec2, f64)> = Vec::new();
    for (normal, offset) in [(Vec2::new(-1.0, 0.0), Vec2::new(h, 0.0)), (Vec2::new(1.0, 0.0), Vec2::new(-h, 0.0)), (Vec2::new(0.0, -1.0), Vec2::new(0.0, h)), (Vec2::new(0.0, 1.0), Vec2::new(0.0, -h))] {
        faces.push((offset, normal, h - 0.6));
    }
    for o in &layout.obstacles {
        if let Obstacle::Box { min, max } = o {
            let c = o.center();
            let (hx, hy) = (0.5 * (max[0] - min[0]), 0.5 * (max[1] - min[1]));
            faces.push((c + Vec2::new(hx, 0.0), Vec2::new(1.0, 0.0), hy - 0.05));
            faces.push((c - Vec2::new(hx, 0.0), Vec2::new(-1.0, 0.0), hy - 0.05));
            faces.push((c + Vec2::new(0.0, hy), Vec2::new(0.0, 1.0), hx - 0.05));
            faces.push((c - Vec2::new(0.0, hy), Vec2::new(0.0, -1.0), hx - 0.05));
        }
    }
    let (face, normal, half_width) = faces[rng.gen_range(0..faces.len())];
    let lateral = Vec2::new(-normal.y, normal.x) * rng.gen_range(-half_width..half_width);
    let stop = face + lateral + normal * rng.gen_range(0.75..0.85);
    let v = rng.gen_range(0.9..1.5);
    let approach = normal.x.atan2(-normal.y) - FRAC_PI_2 + rng.gen_range(-0.25..0.25);
    let start_dist = rng.gen_range(2.2..3.2);
    let start = stop + unit(approach) * start_dist;
    let path = Path::through(&[start, stop]);
    if path.min_clearance(layout, false, 0.0, path.length()) < 0.45 {
        return None;
    }
    let brake = 0.35;
    let t_stop = (path.length() - brake) / v + 2.0 * brake / v;
    let duration = t_stop + 1.4;
    let frames = (duration * fps).ceil() as usize;
    let states = (0..frames)
        .map(|f| {
            let t = f as f64 / fps;
            let (s, speed) = braking_arclength(t, v, path.length(), brake);
            let (pos, yaw) = path.at(s);
            BodyState {
                pos,
                yaw,
                phase: TAU * s / STRIDE,
                gait: (speed / v).min(1.0),
                sit: 0.0,
                seat_height: 0.0,
                reach: smoothstep((t - t_stop) / 0.6),
            }
        })
        .collect();
    Some(Timeline { states, history_end: t_stop - rng.gen_range(0.1..1.2) })
}

fn walk_around(layout: &LayoutSpec, rng: &mut ChaCha8Rng, fps: f64) -> Option<Timeline> {
    let mut objects: Vec<&Obstacle> = layout.obstacles.iter().collect();
    objects.push(&layout.seat);
    let target = objects[rng.gen_range(0..objects.len())];
    let (c, rho) = (target.center(), target.reach());
    let heading = rng.gen_range(0.0..TAU);
    let (dir, perp) = (unit(heading), unit(heading + FRAC_PI_2));
    let offset: f64 = rng.gen_range(0.05..0.35) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let side = offset.signum();
    let lead = rng.gen_range(0.9..1.3);
    let waypoints = [
        c - dir * (rho + 0.7 + lead) + perp * offset,
        c - dir * (rho + 0.7) + perp * offset,
        c + perp * side * (rho + 0.5),
        c + dir * (rho + 0.7) + perp * offset,
        c + dir * (rho + 1.3) + perp * offset,
    ];
    let path = Path::through(&waypoints);
    if path.min_clearance(layout, false, 0.0, path.length()) < 0.4 {
        return None;
    }
    let v = rng.gen_range(0.9..1.4);
    let s_a = (waypoints[1] - waypoints[0]).norm();
    let frames = (path.length() / v * fps).floor() as usize;
    let states = (0..frames)
        .map(|f| {
            let s = v * f as f64 / fps;
            let (pos, yaw) = path.at(s);
            BodyState { pos, yaw, phase: TAU * s / STRIDE, gait: 1.0, sit: 0.0, seat_height: 0.0, reach: 0.0 }
        })
        .collect();
    Some(Timeline { states, history_end: (s_a + rng.gen_range(-0.6..0.2)) / v })
}

fn sit_down(layout: &LayoutSpec, rng: &mut ChaCha8Rng, fps: f64) -> Option<Timeline> {
    let Obstacle::Box { min, max } = &layout.seat else { return None };
    let c = layout.seat.center();
    let seat_height = max[2];
    let half = 0.5 * (max[0] - min[0]);
    let normal = unit(rng.gen_range(0..4) as f64 * FRAC_PI_2);
    let front = c + normal * half;
    let stand = front + normal * 0.30;
    let seated = front - normal * 0.15;
    if layout.clearance(&stand, true) < 0.4 {
        return None;
    }
    let approach = normal.y.atan2(normal.x) + rng.gen_range(-0.7..0.7);
    let start = stand + unit(approach) * rng.gen_range(1.6..2.4);
    let path = Path::through(&[start, stand]);
    if path.min_clearance(layout, true, 0.0, path.length() - 0.3) < 0.45 {
        return None;
    }
    let v = rng.gen_range(0.8..1.2);
    let brake = 0.3;
    let t_stop = (path.length() - brake) / v + 2.0 * brake / v;
    let t_turn = 0.7;
    let t_sit = 1.0;
    let (_, walk_yaw) = path.at(path.length());
    let face_yaw = normal.y.atan2(normal.x);
    let turn = wrap_angle(face_yaw - walk_yaw);
    let duration = t_stop + t_turn + t_sit + 0.8;
    let frames = (duration * fps).ceil() as usize;
    let states = (0..frames)
        .map(|f| {
            let t = f as f64 / fps;
            let (s, speed) = braking_arclength(t, v, path.length(), brake);
            let (pos, _) = path.at(s);
            let turning = smoothstep((t - t_stop) / t_turn);
            let sit = smoothstep((t - t_stop - t_turn) / t_sit);
            let shuffle = if t > t_stop && t < t_stop + t_turn { 0.3 } else { 0.0 };
            BodyState {
                pos: pos + (seated - stand) * sit,
                yaw: walk_yaw + turn * turning,
                phase: TAU * s / STRIDE + if t > t_stop { 4.0 * (t - t_stop) } else { 0.0 },
                gait: (speed / v).min(1.0).max(shuffle),
                sit,
                seat_height,
                reach: 0.0,
            }
        })
        .collect();
    Some(Timeline { states, history_end: t_stop + rng.gen_range(-0.3..(t_turn + 0.2)) })
}

/// Shifts every frame up so its lowest marker clears the floor by 5 mm.
fn lift_above_floor(skeleton: &Skeleton, pose: &mut Pose) {
    let markers = skeleton.marker_vertices(pose).expect("generated pose");
    let low = markers.iter().map(|m| m.z).fold(f64::INFINITY, f64::min);
    if low < 0.005 {
        pose.translation.z += 0.005 - low;
    }
}

struct Generated {
    kind: MotionKind,
    world: MotionSequence,
}

fn generate_motion(cfg: &SynthConfig, skeleton: &Skeleton, layout: &Layout, rng: &mut ChaCha8Rng, preferred: MotionKind) -> Generated {
    let kinds = [MotionKind::WalkAround, MotionKind::SitDown, MotionKind::ReachWall];
    for attempt in 0..400 {
        let kind = if attempt < 200 { preferred } else { kinds[attempt % 3] };
        let timeline = match kind {
            MotionKind::WalkAround => walk_around(&layout.spec, rng, cfg.fps),
            MotionKind::SitDown => sit_down(&layout.spec, rng, cfg.fps),
            MotionKind::ReachWall => reach_wall(&layout.spec, rng, cfg.fps),
        };
        let Some(timeline) = timeline else { continue };
        let end = (timeline.history_end * cfg.fps).round() as i64;
        let start = end - cfg.history as i64 + 1;
        if start < 0 || (start as usize + cfg.frames()) > timeline.states.len() {
            continue;
        }
        let mut frames: Vec<Pose> = timeline.states[start as usize..start as usize + cfg.frames()].iter().map(pose_from_state).collect();
        for pose in &mut frames {
            lift_above_floor(skeleton, pose);
        }
        let mut world = MotionSequence { frames, fps: cfg.fps };
        world.quantize_f32();
        let clear = world.frames.iter().all(|pose| {
            skeleton.marker_vertices(pose).expect("generated pose").iter().all(|m| layout.volume.sample(m) >= -0.01)
        });
        if clear {
            return Generated { kind, world };
        }
    }
    panic!("motion generation did not converge for this layout");
}

/// A whole synthetic dataset: layouts plus per-split samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub seed: u64,
    pub config: SynthConfig,
    pub skeleton: Skeleton,
    pub basis: BasisSet,
    pub layouts: Vec<Layout>,
    pub samples: Vec<Sample>,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Dataset {
    pub fn split(&self, split: Split) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.split == split).collect()
    }

    /// Scene crop of `sample` in its local frame.
    pub fn crop(&self, sample: &Sample) -> SdfVolume {
        self.layouts[sample.layout].volume.crop(&sample.center, self.config.crop_radius).expect("crop overlaps room")
    }

    pub fn surface_sampler(&self) -> SurfaceSampler {
        SurfaceSampler::new(&self.skeleton, self.config.surface_density).expect("positive density")
    }
}

pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Dataset, TrainError> {
    cfg.validate()?;
    let skeleton = Skeleton::default_body();
    let basis = fibonacci_basis(cfg.basis_count, cfg.basis_radius)?;
    let layout_count = cfg.train_layouts + cfg.unseen_layouts;
    let layouts = (0..layout_count)
        .into_par_iter()
        .map(|i| Layout::build(LayoutSpec::random(&mut stream_rng(seed, 1_000 + i as u64), cfg.room_half), cfg.voxel_size))
        .collect::<Result<Vec<_>, _>>()?;
    let mut jobs = Vec::new();
    for (split, count) in [(Split::Train, cfg.train), (Split::TestSeen, cfg.test_seen), (Split::TestUnseen, cfg.test_unseen)] {
        for i in 0..count {
            let layout = match split {
                Split::TestUnseen => cfg.train_layouts + i % cfg.unseen_layouts,
                _ => i % cfg.train_layouts,
            };
            jobs.push((split, i, layout));
        }
    }
    let sampler = SurfaceSampler::new(&skeleton, cfg.surface_density)?;
    let kinds = [MotionKind::WalkAround, MotionKind::SitDown, MotionKind::ReachWall];
    let samples = jobs
        .into_par_iter()
        .enumerate()
        .map(|(j, (split, i, layout))| -> Result<Sample, TrainError> {
            let mut rng = stream_rng(seed, 1_000_000 + j as u64);
            let g = generate_motion(cfg, &skeleton, &layouts[layout], &mut rng, kinds[(i / cfg.train_layouts.max(1) + i) % 3]);
            let center = g.world.frames[cfg.history - 1].translation;
            let mut motion = g.world.translated(&-center);
            motion.quantize_f32();
            let crop = layouts[layout].volume.crop(&center, cfg.crop_radius)?;
            let mut distances = sequence_distances(&crop, &basis, &skeleton, &sampler, &motion)?;
            distances.quantize_f32();
            Ok(Sample { split, layout, kind: g.kind, center, motion, distances })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { seed, config: cfg.clone(), skeleton, basis, layouts, samples })
}
