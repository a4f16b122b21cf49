//! C ABI over `mdkit`: opaque handles, status codes and a per-thread error message.
//!
//! Every function returns an [`MdStatus`]. Handles created by `md_*_new`,
//! `md_*_load` and friends are released with the matching `md_*_free`.
//! Output arrays are caller-allocated; their required lengths are given by
//! the query functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use mdkit::body::{MotionSequence, Pose, Skeleton, SurfaceSampler};
use mdkit::geometry::obj::load_obj;
use mdkit::geometry::{voxelize_sdf, GridSpec, SdfVolume, TriangleMesh, Vec3};
use mdkit::mutual::{fibonacci_basis, sequence_distances};
use mdkit::spectral::{dct, idct};

/// Result of every call. Non-zero values leave a message for [`md_last_error`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Geometry = 5,
    Body = 6,
    Panic = 7,
}

/// Triangle mesh.
pub struct MdMesh(TriangleMesh);
/// Signed distance volume.
pub struct MdSdf(SdfVolume);
/// Capsule skeleton with its markers.
pub struct MdSkeleton(Skeleton);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

struct Failure(MdStatus, String);

impl From<mdkit::geometry::GeometryError> for Failure {
    fn from(e: mdkit::geometry::GeometryError) -> Self {
        use mdkit::geometry::GeometryError as G;
        let status = match e {
            G::Io(_) => MdStatus::Io,
            G::BadFormat(_) => MdStatus::Format,
            _ => MdStatus::Geometry,
        };
        Failure(status, e.to_string())
    }
}

impl From<mdkit::body::BodyError> for Failure {
    fn from(e: mdkit::body::BodyError) -> Self {
        use mdkit::body::BodyError as B;
        let status = match e {
            B::Io(_) => MdStatus::Io,
            B::BadFormat(_) => MdStatus::Format,
            _ => MdStatus::Body,
        };
        Failure(status, e.to_string())
    }
}

impl From<mdkit::mutual::MutualError> for Failure {
    fn from(e: mdkit::mutual::MutualError) -> Self {
        Failure(MdStatus::InvalidArgument, e.to_string())
    }
}

impl From<mdkit::spectral::SpectralError> for Failure {
    fn from(e: mdkit::spectral::SpectralError) -> Self {
        Failure(MdStatus::InvalidArgument, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(MdStatus::InvalidArgument, msg.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside mdkit");
            MdStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MdStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    non_null(p, "path")?;
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn vec3_arg(p: *const f64, what: &str) -> Result<Vec3, Failure> {
    non_null(p, what)?;
    let s = std::slice::from_raw_parts(p, 3);
    Ok(Vec3::new(s[0], s[1], s[2]))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn md_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reads a Wavefront OBJ file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_mesh_load_obj(path: *const c_char, out: *mut *mut MdMesh) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        let mesh = load_obj(&path_arg(path)?)?;
        emit(out, MdMesh(mesh));
        Ok(())
    })
}

/// Axis-aligned box mesh.
///
/// # Safety
/// `min` and `max` must point to 3 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_mesh_cuboid(min: *const f64, max: *const f64, out: *mut *mut MdMesh) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        let mesh = TriangleMesh::cuboid(vec3_arg(min, "min")?, vec3_arg(max, "max")?)?;
        emit(out, MdMesh(mesh));
        Ok(())
    })
}

/// # Safety
/// `mesh` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn md_mesh_free(mesh: *mut MdMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Voxelizes a watertight mesh on the grid with min corner `origin`.
///
/// # Safety
/// `mesh` must be a valid handle, `origin` 3 doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_voxelize(mesh: *const MdMesh, origin: *const f64, voxel_size: f64, resolution: usize, out: *mut *mut MdSdf) -> MdStatus {
    guard(|| {
        non_null(mesh, "mesh")?;
        non_null(out, "out")?;
        let spec = GridSpec::new(vec3_arg(origin, "origin")?, voxel_size, resolution)?;
        let volume = voxelize_sdf(&(*mesh).0, spec)?;
        emit(out, MdSdf(volume));
        Ok(())
    })
}

/// Reads an MDSF file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_load(path: *const c_char, out: *mut *mut MdSdf) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        let volume = SdfVolume::load(&path_arg(path)?)?;
        emit(out, MdSdf(volume));
        Ok(())
    })
}

/// Writes an MDSF file.
///
/// # Safety
/// `sdf` must be a valid handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_save(sdf: *const MdSdf, path: *const c_char) -> MdStatus {
    guard(|| {
        non_null(sdf, "sdf")?;
        (*sdf).0.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// Voxels per axis.
///
/// # Safety
/// `sdf` must be a valid handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_resolution(sdf: *const MdSdf, out: *mut usize) -> MdStatus {
    guard(|| {
        non_null(sdf, "sdf")?;
        non_null(out, "out")?;
        *out = (*sdf).0.spec().resolution;
        Ok(())
    })
}

/// Trilinear signed distance at `point`, with its gradient if `gradient` is not null.
///
/// # Safety
/// `sdf` must be a valid handle, `point` 3 doubles, `value` writable,
/// `gradient` null or 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_sample(sdf: *const MdSdf, point: *const f64, value: *mut f64, gradient: *mut f64) -> MdStatus {
    guard(|| {
        non_null(sdf, "sdf")?;
        non_null(value, "value")?;
        let (v, g) = (*sdf).0.sample_with_gradient(&vec3_arg(point, "point")?);
        *value = v;
        if !gradient.is_null() {
            std::slice::from_raw_parts_mut(gradient, 3).copy_from_slice(g.as_slice());
        }
        Ok(())
    })
}

/// Sub-volume around `center` with `center` as its local origin.
///
/// # Safety
/// `sdf` must be a valid handle, `center` 3 doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_crop(sdf: *const MdSdf, center: *const f64, radius: f64, out: *mut *mut MdSdf) -> MdStatus {
    guard(|| {
        non_null(sdf, "sdf")?;
        non_null(out, "out")?;
        let crop = (*sdf).0.crop(&vec3_arg(center, "center")?, radius)?;
        emit(out, MdSdf(crop));
        Ok(())
    })
}

/// # Safety
/// `sdf` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn md_sdf_free(sdf: *mut MdSdf) {
    if !sdf.is_null() {
        drop(Box::from_raw(sdf));
    }
}

/// Built-in 16-joint capsule body with 67 markers.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_default(out: *mut *mut MdSkeleton) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        emit(out, MdSkeleton(Skeleton::default_body()));
        Ok(())
    })
}

/// Reads a skeleton JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_load(path: *const c_char, out: *mut *mut MdSkeleton) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        let skeleton = Skeleton::load(&path_arg(path)?)?;
        emit(out, MdSkeleton(skeleton));
        Ok(())
    })
}

/// Marker count `K` and pose width `M`.
///
/// # Safety
/// `skeleton` must be a valid handle; outputs writable or null.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_dims(skeleton: *const MdSkeleton, markers: *mut usize, pose_dim: *mut usize) -> MdStatus {
    guard(|| {
        non_null(skeleton, "skeleton")?;
        if !markers.is_null() {
            *markers = (*skeleton).0.marker_count();
        }
        if !pose_dim.is_null() {
            *pose_dim = (*skeleton).0.pose_dim();
        }
        Ok(())
    })
}

/// Rest pose vector (`M` values): identity rotations, zero translation.
///
/// # Safety
/// `out` must hold `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_rest_pose(skeleton: *const MdSkeleton, out: *mut f64, out_len: usize) -> MdStatus {
    guard(|| {
        non_null(skeleton, "skeleton")?;
        non_null(out, "out")?;
        let s = &(*skeleton).0;
        if out_len != s.pose_dim() {
            return Err(invalid(&format!("output holds {out_len} values, need {}", s.pose_dim())));
        }
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&Pose::rest(s).to_vector());
        Ok(())
    })
}

/// Posed marker positions (`K × 3`) of one pose vector of width `M`.
///
/// # Safety
/// `pose` must hold `pose_len` doubles and `out` `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_markers(skeleton: *const MdSkeleton, pose: *const f64, pose_len: usize, out: *mut f64, out_len: usize) -> MdStatus {
    guard(|| {
        non_null(skeleton, "skeleton")?;
        non_null(pose, "pose")?;
        non_null(out, "out")?;
        let s = &(*skeleton).0;
        if pose_len != s.pose_dim() {
            return Err(invalid(&format!("pose has {pose_len} values, skeleton needs {}", s.pose_dim())));
        }
        if out_len != 3 * s.marker_count() {
            return Err(invalid(&format!("output holds {out_len} values, need {}", 3 * s.marker_count())));
        }
        let pose = Pose::from_vector(std::slice::from_raw_parts(pose, pose_len))?;
        let markers = s.marker_vertices(&pose)?;
        let dst = std::slice::from_raw_parts_mut(out, out_len);
        for (chunk, m) in dst.chunks_mut(3).zip(&markers) {
            chunk.copy_from_slice(m.as_slice());
        }
        Ok(())
    })
}

/// # Safety
/// `skeleton` must be null or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn md_skeleton_free(skeleton: *mut MdSkeleton) {
    if !skeleton.is_null() {
        drop(Box::from_raw(skeleton));
    }
}

/// `count` Fibonacci points on the sphere of `radius`, written as `count × 3`.
///
/// # Safety
/// `out` must hold `3·count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_basis_points(count: usize, radius: f64, out: *mut f64) -> MdStatus {
    guard(|| {
        non_null(out, "out")?;
        let basis = fibonacci_basis(count, radius)?;
        let dst = std::slice::from_raw_parts_mut(out, 3 * count);
        for (chunk, p) in dst.chunks_mut(3).zip(&basis.points) {
            chunk.copy_from_slice(p.as_slice());
        }
        Ok(())
    })
}

/// Orthonormal DCT (`inverse == 0`) or its inverse of `len` values.
///
/// # Safety
/// `input` and `output` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn md_dct(input: *const f64, output: *mut f64, len: usize, inverse: i32) -> MdStatus {
    guard(|| {
        non_null(input, "input")?;
        non_null(output, "output")?;
        let x = std::slice::from_raw_parts(input, len);
        let y = if inverse == 0 { dct(x)? } else { idct(x)? };
        std::slice::from_raw_parts_mut(output, len).copy_from_slice(&y);
        Ok(())
    })
}

/// Per-marker (`frames × K`) and per-basis (`frames × P`) distances of a
/// motion given as `frames × M` pose vectors, against `basis_count` points
/// on a sphere of `basis_radius` around the volume's origin.
///
/// # Safety
/// Handles must be valid; `poses` must hold `frames·M` doubles, `d_out`
/// `frames·K` and `b_out` `frames·basis_count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn md_distances(
    sdf: *const MdSdf,
    skeleton: *const MdSkeleton,
    poses: *const f64,
    frames: usize,
    basis_count: usize,
    basis_radius: f64,
    surface_density: f64,
    d_out: *mut f64,
    b_out: *mut f64,
) -> MdStatus {
    guard(|| {
        non_null(sdf, "sdf")?;
        non_null(skeleton, "skeleton")?;
        non_null(poses, "poses")?;
        non_null(d_out, "d_out")?;
        non_null(b_out, "b_out")?;
        let s = &(*skeleton).0;
        let m = s.pose_dim();
        let values = std::slice::from_raw_parts(poses, frames * m);
        let frames_vec = values.chunks(m).map(Pose::from_vector).collect::<Result<Vec<_>, _>>()?;
        let motion = MotionSequence { frames: frames_vec, fps: 30.0 };
        let basis = fibonacci_basis(basis_count, basis_radius)?;
        let sampler = SurfaceSampler::new(s, surface_density)?;
        let seq = sequence_distances(&(*sdf).0, &basis, s, &sampler, &motion)?;
        let d = std::slice::from_raw_parts_mut(d_out, frames * s.marker_count());
        let b = std::slice::from_raw_parts_mut(b_out, frames * basis_count);
        for (f, (dr, br)) in seq.d.iter().zip(&seq.b).enumerate() {
            d[f * dr.len()..(f + 1) * dr.len()].copy_from_slice(dr);
            b[f * br.len()..(f + 1) * br.len()].copy_from_slice(br);
        }
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn md_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
