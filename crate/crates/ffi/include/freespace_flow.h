#ifndef FREESPACE_FLOW_H
#define FREESPACE_FLOW_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FsofCurveKind {
  // `k w^2 / (1 - k w)`, `w = v - v0`.
  FSOF_CURVE_KIND_RATIONAL_DISPLACEMENT = 0,
  // `a w^2`.
  FSOF_CURVE_KIND_QUADRATIC_VELOCITY,
  // `a v^2 + b v + c`.
  FSOF_CURVE_KIND_GENERIC_QUADRATIC,
} FsofCurveKind;

typedef enum FsofModelKind {
  // Uses `pose`.
  FSOF_MODEL_KIND_FULL_DISPLACEMENT = 0,
  // Uses `state`.
  FSOF_MODEL_KIND_FULL_VELOCITY,
  // Uses `z_d`.
  FSOF_MODEL_KIND_SIMPLE_DISPLACEMENT,
  // Uses `v_r`.
  FSOF_MODEL_KIND_SIMPLE_VELOCITY,
  // Uses `z_d`.
  FSOF_MODEL_KIND_SIMPLEST_DISPLACEMENT,
  // Uses `v_r`.
  FSOF_MODEL_KIND_SIMPLEST_VELOCITY,
} FsofModelKind;

typedef enum FsofStatus {
  FSOF_STATUS_OK = 0,
  FSOF_STATUS_NULL_POINTER,
  FSOF_STATUS_INVALID_ARGUMENT,
  // Pixel at or above the horizon.
  FSOF_STATUS_HORIZON,
  FSOF_STATUS_BEHIND_CAMERA,
  FSOF_STATUS_DIMENSION_MISMATCH,
  FSOF_STATUS_UNITS_MISMATCH,
  FSOF_STATUS_EMPTY_INPUT,
  FSOF_STATUS_EMPTY_OVERLAP,
  FSOF_STATUS_INSUFFICIENT_ROWS,
  FSOF_STATUS_DEGENERATE_FIT,
  FSOF_STATUS_NON_FINITE,
  FSOF_STATUS_OUT_OF_BOUNDS,
  FSOF_STATUS_BAD_MAGIC,
  // Unsupported PNG bit depth or channel count.
  FSOF_STATUS_WRONG_FORMAT,
  FSOF_STATUS_TRUNCATED_FILE,
  FSOF_STATUS_PNG,
  FSOF_STATUS_JSON,
  FSOF_STATUS_IO,
  FSOF_STATUS_PANIC,
} FsofStatus;

typedef enum FsofUnits {
  FSOF_UNITS_PIXELS_PER_FRAME = 0,
  FSOF_UNITS_PIXELS_PER_SECOND = 1,
} FsofUnits;

// Opaque dense flow map.
typedef struct FsofFlowMap FsofFlowMap;

// Opaque freespace mask.
typedef struct FsofMask FsofMask;

typedef struct FsofIntrinsics {
  double fx;
  double fy;
  double u0;
  double v0;
} FsofIntrinsics;

// Camera height above the road (meters) and roll (radians).
typedef struct FsofMount {
  double h;
  double theta;
} FsofMount;

// Inter-frame motion: lateral and longitudinal displacement (meters), yaw
// (radians).
typedef struct FsofPose {
  double x_d;
  double z_d;
  double phi;
} FsofPose;

typedef struct FsofFlow {
  double fu;
  double fv;
} FsofFlow;

typedef struct FsofVelocityState {
  // Rear-axle speed, m/s.
  double v_r;
  // Front steering angle, radians.
  double delta_f;
  // Wheelbase, meters.
  double l;
  double heading;
} FsofVelocityState;

// Flow model selector; only the fields named by `kind` are read.
typedef struct FsofModel {
  enum FsofModelKind kind;
  struct FsofPose pose;
  struct FsofVelocityState state;
  double z_d;
  double v_r;
} FsofModel;

typedef struct FsofMetrics {
  // Average angular error, radians.
  double e_a;
  double e_e;
  double e_u;
  double e_v;
  size_t n;
} FsofMetrics;

// Fitted row profile. Coefficients by kind: rational `c0 = k, c1 = v0`;
// velocity quadratic `c0 = a, c1 = v0`; generic `c0 = a, c1 = b, c2 = c`.
typedef struct FsofCurveFit {
  enum FsofCurveKind kind;
  double c0;
  double c1;
  double c2;
  double residual_rms;
  size_t inliers;
  size_t rows_used;
  enum FsofUnits units;
} FsofCurveFit;

typedef struct FsofPoseSearch {
  double x_d_min;
  double x_d_max;
  double z_d_min;
  double z_d_max;
  double phi_min;
  double phi_max;
  size_t swarm_size;
  size_t max_iterations;
  double inertia;
  double cognitive;
  double social;
  double tolerance;
  uint64_t seed;
  // 0 keeps every observed pixel.
  size_t max_samples;
  bool refine;
} FsofPoseSearch;

typedef struct FsofPoseEstimate {
  struct FsofPose pose;
  // Mean endpoint error at `pose`, pixels.
  double cost;
  size_t iterations;
  bool converged;
} FsofPoseEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *fsof_last_error_message(void);

// Static, NUL-terminated name of a status code.
const char *fsof_status_name(enum FsofStatus status);

// Full displacement flow at pixel `(u, v)`.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_displacement_flow(double u,
                                       double v,
                                       const struct FsofIntrinsics *k,
                                       const struct FsofMount *m,
                                       const struct FsofPose *pose,
                                       struct FsofFlow *flow);

// Full velocity flow (pixels per second) at pixel `(u, v)`.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_velocity_flow(double u,
                                   double v,
                                   const struct FsofIntrinsics *k,
                                   const struct FsofMount *m,
                                   const struct FsofVelocityState *state,
                                   struct FsofFlow *flow);

// Flow of any model at pixel `(u, v)`.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_model_flow(double u,
                                double v,
                                const struct FsofIntrinsics *k,
                                const struct FsofMount *m,
                                const struct FsofModel *model,
                                struct FsofFlow *flow);

// New all-invalid map.
//
// # Safety
// `map` must be null or valid for writes.
enum FsofStatus fsof_flow_map_new(size_t width,
                                  size_t height,
                                  enum FsofUnits units,
                                  struct FsofFlowMap **map);

// Releases a map; null is ignored.
//
// # Safety
// `map` must be null or a handle from this library not yet freed.
void fsof_flow_map_free(struct FsofFlowMap *map);

// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_flow_map_info(const struct FsofFlowMap *map,
                                   size_t *width,
                                   size_t *height,
                                   enum FsofUnits *units);

// Flow at `(u, v)`; `valid` receives whether the pixel carries flow.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_flow_map_get(const struct FsofFlowMap *map,
                                  size_t u,
                                  size_t v,
                                  struct FsofFlow *flow,
                                  bool *valid);

// Sets `(u, v)`; a null `flow` marks the pixel invalid.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_flow_map_set(struct FsofFlowMap *map,
                                  size_t u,
                                  size_t v,
                                  const struct FsofFlow *flow);

// Copies the map out in row-major order. Each of `fu`, `fv`, `valid` may be
// null; non-null buffers must hold `len >= width * height` elements.
//
// # Safety
// Non-null buffers must be valid for `len` writes.
enum FsofStatus fsof_flow_map_export(const struct FsofFlowMap *map,
                                     double *fu,
                                     double *fv,
                                     uint8_t *valid,
                                     size_t len);

// Renders `model` over a `width x height` image, restricted to `region`
// when it is non-null.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_render_flow_map(size_t width,
                                     size_t height,
                                     const struct FsofMask *region,
                                     const struct FsofModel *model,
                                     const struct FsofIntrinsics *k,
                                     const struct FsofMount *m,
                                     struct FsofFlowMap **map);

// Reads a `.png` (KITTI 16-bit) or `.flo` file, with its units sidecar.
//
// # Safety
// `file` must be a NUL-terminated string; `map` valid for writes.
enum FsofStatus fsof_read_flow(const char *file, struct FsofFlowMap **map);

// Writes by extension; `saturated` (nullable) receives the number of KITTI
// components clamped to the representable range.
//
// # Safety
// `file` must be a NUL-terminated string; other pointers null or valid.
enum FsofStatus fsof_write_flow(const struct FsofFlowMap *map, const char *file, size_t *saturated);

// # Safety
// `mask` must be null or valid for writes.
enum FsofStatus fsof_mask_new(size_t width, size_t height, bool fill, struct FsofMask **mask);

// Releases a mask; null is ignored.
//
// # Safety
// `mask` must be null or a handle from this library not yet freed.
void fsof_mask_free(struct FsofMask *mask);

// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_mask_info(const struct FsofMask *mask,
                               size_t *width,
                               size_t *height,
                               size_t *count);

// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_mask_get(const struct FsofMask *mask, size_t u, size_t v, bool *value);

// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_mask_set(struct FsofMask *mask, size_t u, size_t v, bool value);

// Reads an 8-bit grayscale PNG; nonzero is freespace.
//
// # Safety
// `file` must be a NUL-terminated string; `mask` valid for writes.
enum FsofStatus fsof_read_mask(const char *file, struct FsofMask **mask);

// # Safety
// `file` must be a NUL-terminated string; `mask` a live handle.
enum FsofStatus fsof_write_mask(const struct FsofMask *mask, const char *file);

// Scores `est` against `gt` on pixels valid in both and set in `mask`
// (nullable).
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_evaluate(const struct FsofFlowMap *gt,
                              const struct FsofFlowMap *est,
                              const struct FsofMask *mask,
                              struct FsofMetrics *report);

// Projects F_v row-wise (histogram bin `bin_w`, rows with fewer than
// `min_row_support` samples skipped) and fits a curve of `kind`.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_fit_fv_curve(const struct FsofFlowMap *map,
                                  const struct FsofMask *mask,
                                  const struct FsofIntrinsics *k,
                                  enum FsofCurveKind kind,
                                  double bin_w,
                                  size_t min_row_support,
                                  struct FsofCurveFit *fit);

// Row-constant F_v map of a fitted curve (F_u is zero).
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_render_fitted_fv(const struct FsofCurveFit *fit,
                                      size_t width,
                                      size_t height,
                                      struct FsofFlowMap **map);

// Freespace where `|F_v - fitted F_v| <= tau`.
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_segment_freespace(const struct FsofFlowMap *observed,
                                       const struct FsofFlowMap *fitted,
                                       double tau,
                                       struct FsofMask **mask);

// Default pose search settings.
//
// # Safety
// `cfg` must be null or valid for writes.
enum FsofStatus fsof_pose_search_default(struct FsofPoseSearch *cfg);

// Recovers `(x_d, z_d, phi)` from observed flow. `mask` and `cfg` may be
// null (whole map, default settings).
//
// # Safety
// Pointers must be null or valid for the duration of the call.
enum FsofStatus fsof_estimate_pose(const struct FsofFlowMap *observed,
                                   const struct FsofMask *mask,
                                   const struct FsofIntrinsics *k,
                                   const struct FsofMount *m,
                                   const struct FsofPoseSearch *cfg,
                                   struct FsofPoseEstimate *estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREESPACE_FLOW_H */
