use std::fmt::Write as _;

use super::TrainError;
use crate::body::{Pose, Skeleton};
use crate::geometry::Vec3;

/// Future frames (1-based) reported individually: 0.5 s and 1.0 s at 30 fps.
pub const DEFAULT_HORIZONS: [usize; 2] = [15, 30];

/// Per-frame errors of one predicted sequence, in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameErrors {
    pub path_mm: Vec<f64>,
    pub pose_mm: Vec<f64>,
}

/// Root path error and root-relative MPJPE for every frame.
pub fn path_pose_error(skeleton: &Skeleton, predicted: &[Pose], truth: &[Pose]) -> Result<FrameErrors, TrainError> {
    if predicted.len() != truth.len() {
        return Err(TrainError::LengthMismatch { expected: truth.len(), actual: predicted.len() });
    }
    let mut out = FrameErrors { path_mm: Vec::with_capacity(truth.len()), pose_mm: Vec::with_capacity(truth.len()) };
    for (p, t) in predicted.iter().zip(truth) {
        out.path_mm.push(1000.0 * (p.translation - t.translation).norm());
        let local = |pose: &Pose| -> Result<Vec<Vec3>, TrainError> {
            let mut centered = pose.clone();
            centered.translation = Vec3::zeros();
            Ok(skeleton.forward_kinematics(&centered)?)
        };
        let (jp, jt) = (local(p)?, local(t)?);
        let sum: f64 = jp.iter().zip(&jt).map(|(a, b)| (a - b).norm()).sum();
        out.pose_mm.push(1000.0 * sum / jp.len() as f64);
    }
    Ok(out)
}

/// Errors averaged over sequences, at fixed horizons and over all frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub horizons: Vec<usize>,
    pub fps: f64,
    pub path_mm: Vec<f64>,
    pub pose_mm: Vec<f64>,
    pub path_mean: f64,
    pub pose_mean: f64,
    pub sequences: usize,
}

impl Metrics {
    pub fn aggregate(errors: &[FrameErrors], horizons: &[usize], fps: f64) -> Result<Self, TrainError> {
        let frames = errors.first().map_or(0, |e| e.path_mm.len());
        if errors.is_empty() || frames == 0 {
            return Err(TrainError::EmptySplit("nothing to aggregate".into()));
        }
        if let Some(e) = errors.iter().find(|e| e.path_mm.len() != frames || e.pose_mm.len() != frames) {
            return Err(TrainError::LengthMismatch { expected: frames, actual: e.path_mm.len() });
        }
        if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > frames) {
            return Err(TrainError::LengthMismatch { expected: frames, actual: h });
        }
        let n = errors.len() as f64;
        fn path(e: &FrameErrors) -> &[f64] {
            &e.path_mm
        }
        fn pose(e: &FrameErrors) -> &[f64] {
            &e.pose_mm
        }
        let at = |f: fn(&FrameErrors) -> &[f64], u: usize| errors.iter().map(|e| f(e)[u]).sum::<f64>() / n;
        let mean = |f: fn(&FrameErrors) -> &[f64]| errors.iter().flat_map(|e| f(e).iter()).sum::<f64>() / (n * frames as f64);
        Ok(Self {
            horizons: horizons.to_vec(),
            fps,
            path_mm: horizons.iter().map(|&h| at(path, h - 1)).collect(),
            pose_mm: horizons.iter().map(|&h| at(pose, h - 1)).collect(),
            path_mean: mean(path),
            pose_mean: mean(pose),
            sequences: errors.len(),
        })
    }

    fn horizon_labels(&self) -> Vec<String> {
        self.horizons.iter().map(|&h| format!("{:.1}s", h as f64 / self.fps)).collect()
    }
}

/// Named rows of metrics sharing the same horizons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTable {
    pub rows: Vec<(String, Metrics)>,
}

impl MetricsTable {
    pub fn get(&self, name: &str) -> Option<&Metrics> {
        self.rows.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("method");
        if let Some((_, first)) = self.rows.first() {
            for kind in ["path", "pose"] {
                for label in first.horizon_labels() {
                    write!(out, ",{kind}_{label}").unwrap();
                }
                write!(out, ",{kind}_mean").unwrap();
            }
        }
        out.push('\n');
        for (name, m) in &self.rows {
            out.push_str(name);
            for (values, mean) in [(&m.path_mm, m.path_mean), (&m.pose_mm, m.pose_mean)] {
                for v in values.iter().chain(std::iter::once(&mean)) {
                    write!(out, ",{v:.3}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned text table: path error columns then pose error columns.
    pub fn pretty(&self) -> String {
        let Some((_, first)) = self.rows.first() else { return String::new() };
        let labels: Vec<String> = first.horizon_labels().into_iter().chain(std::iter::once("mean".to_string())).collect();
        let name_w = self.rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
        let col_w = 9;
        let group_w = labels.len() * (col_w + 1) - 1;
        let mut out = String::new();
        writeln!(out, "{:name_w$} | {:^group_w$} | {:^group_w$}", "", "Path Error (mm)", "Pose Error (mm)").unwrap();
        let header: Vec<String> = labels.iter().map(|l| format!("{l:>col_w$}")).collect();
        writeln!(out, "{:name_w$} | {} | {}", "method", header.join(" "), header.join(" ")).unwrap();
        writeln!(out, "{}", "-".repeat(name_w + 2 * group_w + 6)).unwrap();
        for (name, m) in &self.rows {
            let cells = |values: &[f64], mean: f64| {
                values.iter().chain(std::iter::once(&mean)).map(|v| format!("{v:>col_w$.1}")).collect::<Vec<_>>().join(" ")
            };
            writeln!(out, "{name:name_w$} | {} | {}", cells(&m.path_mm, m.path_mean), cells(&m.pose_mm, m.pose_mean)).unwrap();
        }
        out
    }
}
