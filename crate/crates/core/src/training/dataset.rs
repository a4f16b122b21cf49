//! On-disk layout of a synthetic dataset directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{Dataset, Layout, LayoutSpec, MotionKind, Sample, Split, SynthConfig};
use super::TrainError;
use crate::body::{MotionSequence, Skeleton};
use crate::geometry::obj::write_obj;
use crate::geometry::{SdfVolume, Vec3};
use crate::mutual::{fibonacci_basis, DistanceSequence};

const FORMAT: &str = "mdkit-synthetic-1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    seed: u64,
    config: SynthConfig,
    skeleton: String,
    layouts: Vec<LayoutEntry>,
    samples: Vec<SampleEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutEntry {
    spec: LayoutSpec,
    mesh: String,
    volume: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleEntry {
    split: Split,
    layout: usize,
    kind: MotionKind,
    center: [f64; 3],
    motion: String,
    distances: String,
}

impl Dataset {
    /// Writes `manifest.json`, `skeleton.json`, `layouts/` and `samples/` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), TrainError> {
        std::fs::create_dir_all(dir.join("layouts"))?;
        std::fs::create_dir_all(dir.join("samples"))?;
        std::fs::write(dir.join("skeleton.json"), self.skeleton.to_json())?;
        let mut layouts = Vec::new();
        for (i, l) in self.layouts.iter().enumerate() {
            let entry = LayoutEntry { spec: l.spec.clone(), mesh: format!("layouts/room_{i:02}.obj"), volume: format!("layouts/room_{i:02}.mdsf") };
            let mut obj = Vec::new();
            write_obj(&l.mesh, &mut obj)?;
            std::fs::write(dir.join(&entry.mesh), obj)?;
            l.volume.save(&dir.join(&entry.volume))?;
            layouts.push(entry);
        }
        let mut samples = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let entry = SampleEntry {
                split: s.split,
                layout: s.layout,
                kind: s.kind,
                center: [s.center.x, s.center.y, s.center.z],
                motion: format!("samples/{i:04}.mdms"),
                distances: format!("samples/{i:04}.mdds"),
            };
            s.motion.save(&dir.join(&entry.motion))?;
            s.distances.save(&dir.join(&entry.distances))?;
            samples.push(entry);
        }
        let manifest = Manifest { format: FORMAT.into(), seed: self.seed, config: self.config.clone(), skeleton: "skeleton.json".into(), layouts, samples };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let manifest: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.format != FORMAT {
            return Err(TrainError::BadDataset(format!("unknown dataset format {:?}", manifest.format)));
        }
        let cfg = manifest.config;
        cfg.validate()?;
        let skeleton = Skeleton::load(&dir.join(&manifest.skeleton))?;
        let basis = fibonacci_basis(cfg.basis_count, cfg.basis_radius)?;
        let layouts = manifest
            .layouts
            .into_iter()
            .map(|e| -> Result<Layout, TrainError> {
                let volume = SdfVolume::load(&dir.join(&e.volume))?;
                Ok(Layout { mesh: e.spec.mesh(), spec: e.spec, volume: std::sync::Arc::new(volume) })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let samples = manifest
            .samples
            .into_iter()
            .map(|e| -> Result<Sample, TrainError> {
                if e.layout >= layouts.len() {
                    return Err(TrainError::BadDataset(format!("sample refers to missing layout {}", e.layout)));
                }
                let motion = MotionSequence::load(&dir.join(&e.motion))?;
                let distances = DistanceSequence::load(&dir.join(&e.distances))?;
                if motion.len() != cfg.frames() || distances.len() != cfg.frames() {
                    return Err(TrainError::LengthMismatch { expected: cfg.frames(), actual: motion.len().min(distances.len()) });
                }
                if motion.pose_dim() != skeleton.pose_dim() || distances.marker_count() != skeleton.marker_count() || distances.basis_count() != basis.len() {
                    return Err(TrainError::BadDataset(format!("{} does not match the skeleton or basis", e.motion)));
                }
                Ok(Sample { split: e.split, layout: e.layout, kind: e.kind, center: Vec3::from(e.center), motion, distances })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Dataset { seed: manifest.seed, config: cfg, skeleton, basis, layouts, samples })
    }
}
