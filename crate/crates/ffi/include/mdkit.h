/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef MDKIT_H
#define MDKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call. Non-zero values leave a message for [`md_last_error`].
typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_IO = 3,
  MD_STATUS_FORMAT = 4,
  MD_STATUS_GEOMETRY = 5,
  MD_STATUS_BODY = 6,
  MD_STATUS_PANIC = 7,
} MdStatus;

// Triangle mesh.
typedef struct MdMesh MdMesh;

// Signed distance volume.
typedef struct MdSdf MdSdf;

// Capsule skeleton with its markers.
typedef struct MdSkeleton MdSkeleton;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `len`) and returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t md_last_error(char *buf, size_t len);

// Reads a Wavefront OBJ file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_mesh_load_obj(const char *path, struct MdMesh **out);

// Axis-aligned box mesh.
//
// # Safety
// `min` and `max` must point to 3 doubles; `out` must be writable.
enum MdStatus md_mesh_cuboid(const double *min, const double *max, struct MdMesh **out);

// # Safety
// `mesh` must be null or a handle from this library, freed at most once.
void md_mesh_free(struct MdMesh *mesh);

// Voxelizes a watertight mesh on the grid with min corner `origin`.
//
// # Safety
// `mesh` must be a valid handle, `origin` 3 doubles, `out` writable.
enum MdStatus md_sdf_voxelize(const struct MdMesh *mesh,
                              const double *origin,
                              double voxel_size,
                              size_t resolution,
                              struct MdSdf **out);

// Reads an MDSF file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_sdf_load(const char *path, struct MdSdf **out);

// Writes an MDSF file.
//
// # Safety
// `sdf` must be a valid handle; `path` a NUL-terminated string.
enum MdStatus md_sdf_save(const struct MdSdf *sdf, const char *path);

// Voxels per axis.
//
// # Safety
// `sdf` must be a valid handle; `out` writable.
enum MdStatus md_sdf_resolution(const struct MdSdf *sdf, size_t *out);

// Trilinear signed distance at `point`, with its gradient if `gradient` is not null.
//
// # Safety
// `sdf` must be a valid handle, `point` 3 doubles, `value` writable,
// `gradient` null or 3 writable doubles.
enum MdStatus md_sdf_sample(const struct MdSdf *sdf,
                            const double *point,
                            double *value,
                            double *gradient);

// Sub-volume around `center` with `center` as its local origin.
//
// # Safety
// `sdf` must be a valid handle, `center` 3 doubles, `out` writable.
enum MdStatus md_sdf_crop(const struct MdSdf *sdf,
                          const double *center,
                          double radius,
                          struct MdSdf **out);

// # Safety
// `sdf` must be null or a handle from this library, freed at most once.
void md_sdf_free(struct MdSdf *sdf);

// Built-in 16-joint capsule body with 67 markers.
//
// # Safety
// `out` must be writable.
enum MdStatus md_skeleton_default(struct MdSkeleton **out);

// Reads a skeleton JSON file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MdStatus md_skeleton_load(const char *path, struct MdSkeleton **out);

// Marker count `K` and pose width `M`.
//
// # Safety
// `skeleton` must be a valid handle; outputs writable or null.
enum MdStatus md_skeleton_dims(const struct MdSkeleton *skeleton,
                               size_t *markers,
                               size_t *pose_dim);

// Rest pose vector (`M` values): identity rotations, zero translation.
//
// # Safety
// `out` must hold `out_len` writable doubles.
enum MdStatus md_skeleton_rest_pose(const struct MdSkeleton *skeleton, double *out, size_t out_len);

// Posed marker positions (`K × 3`) of one pose vector of width `M`.
//
// # Safety
// `pose` must hold `pose_len` doubles and `out` `out_len` writable doubles.
enum MdStatus md_skeleton_markers(const struct MdSkeleton *skeleton,
                                  const double *pose,
                                  size_t pose_len,
                                  double *out,
                                  size_t out_len);

// # Safety
// `skeleton` must be null or a handle from this library, freed at most once.
void md_skeleton_free(struct MdSkeleton *skeleton);

// `count` Fibonacci points on the sphere of `radius`, written as `count × 3`.
//
// # Safety
// `out` must hold `3·count` writable doubles.
enum MdStatus md_basis_points(size_t count, double radius, double *out);

// Orthonormal DCT (`inverse == 0`) or its inverse of `len` values.
//
// # Safety
// `input` and `output` must each hold `len` doubles.
enum MdStatus md_dct(const double *input, double *output, size_t len, int32_t inverse);

// Per-marker (`frames × K`) and per-basis (`frames × P`) distances of a
// motion given as `frames × M` pose vectors, against `basis_count` points
// on a sphere of `basis_radius` around the volume's origin.
//
// # Safety
// Handles must be valid; `poses` must hold `frames·M` doubles, `d_out`
// `frames·K` and `b_out` `frames·basis_count` writable doubles.
enum MdStatus md_distances(const struct MdSdf *sdf,
                           const struct MdSkeleton *skeleton,
                           const double *poses,
                           size_t frames,
                           size_t basis_count,
                           double basis_radius,
                           double surface_density,
                           double *d_out,
                           double *b_out);

// Library version as a static NUL-terminated string.
const char *md_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDKIT_H */
