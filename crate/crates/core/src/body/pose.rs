use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::rotation::{Rot6, IDENTITY_6D};
use super::skeleton::Skeleton;
use super::BodyError;
use crate::geometry::Vec3;

/// One body configuration: root translation, root orientation, and the
/// local rotation of every non-root joint, all rotations in 6-D form.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub root: Rot6,
    pub local: Vec<Rot6>,
}

impl Pose {
    pub fn rest(skeleton: &Skeleton) -> Self {
        Self {
            translation: Vec3::zeros(),
            root: IDENTITY_6D,
            local: vec![IDENTITY_6D; skeleton.joint_count() - 1],
        }
    }

    pub fn dim(&self) -> usize {
        9 + 6 * self.local.len()
    }

    /// Flattened `(t, r, x_local)` vector.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(self.translation.as_slice());
        v.extend_from_slice(&self.root);
        for r in &self.local {
            v.extend_from_slice(r);
        }
        v
    }

    pub fn from_vector(v: &[f64]) -> Result<Self, BodyError> {
        if v.len() < 9 || (v.len() - 9) % 6 != 0 {
            return Err(BodyError::DimensionMismatch { expected: 9, actual: v.len() });
        }
        let rot = |s: &[f64]| -> Rot6 { s.try_into().expect("six entries") };
        Ok(Self {
            translation: Vec3::new(v[0], v[1], v[2]),
            root: rot(&v[3..9]),
            local: v[9..].chunks(6).map(rot).collect(),
        })
    }
}

/// Ordered poses sampled at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<Pose>,
    pub fps: f64,
}

const MOTION_MAGIC: &[u8; 4] = b"MDMS";
const MOTION_VERSION: u32 = 1;

impl MotionSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn pose_dim(&self) -> usize {
        self.frames.first().map_or(0, Pose::dim)
    }

    pub fn slice(&self, start: usize, end: usize) -> MotionSequence {
        MotionSequence { frames: self.frames[start..end].to_vec(), fps: self.fps }
    }

    /// Rigidly shifts every root translation.
    pub fn translated(&self, by: &Vec3) -> MotionSequence {
        let mut out = self.clone();
        for f in &mut out.frames {
            f.translation += by;
        }
        out
    }

    /// Rounds every pose entry through `f32`, matching the file format.
    pub fn quantize_f32(&mut self) {
        for f in &mut self.frames {
            let v: Vec<f64> = f.to_vector().into_iter().map(|x| x as f32 as f64).collect();
            *f = Pose::from_vector(&v).expect("same layout");
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(MOTION_MAGIC)?;
        w.write_u32::<LittleEndian>(MOTION_VERSION)?;
        w.write_u32::<LittleEndian>(self.frames.len() as u32)?;
        w.write_u32::<LittleEndian>(self.pose_dim() as u32)?;
        w.write_f32::<LittleEndian>(self.fps as f32)?;
        for f in &self.frames {
            for x in f.to_vector() {
                w.write_f32::<LittleEndian>(x as f32)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, BodyError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MOTION_MAGIC {
            return Err(BodyError::BadFormat("missing MDMS magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != MOTION_VERSION {
            return Err(BodyError::BadFormat(format!("unsupported MDMS version {version}")));
        }
        let count = r.read_u32::<LittleEndian>()? as usize;
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let fps = r.read_f32::<LittleEndian>()? as f64;
        let mut frames = Vec::with_capacity(count);
        let mut buf = vec![0f32; dim];
        for _ in 0..count {
            r.read_f32_into::<LittleEndian>(&mut buf)?;
            let v: Vec<f64> = buf.iter().map(|&x| x as f64).collect();
            frames.push(Pose::from_vector(&v)?);
        }
        Ok(Self { frames, fps })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), BodyError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, BodyError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
