#ifndef ANCHORREG_H
#define ANCHORREG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArStatus {
  AR_STATUS_OK = 0,
  AR_STATUS_NULL_POINTER = 1,
  AR_STATUS_INVALID_ARGUMENT = 2,
  AR_STATUS_CONFIG = 3,
  AR_STATUS_IO = 4,
  AR_STATUS_DEGENERATE = 5,
  AR_STATUS_NUMERICAL = 6,
  AR_STATUS_INSUFFICIENT_ANCHORS = 7,
  AR_STATUS_MISSING_GROUND_TRUTH = 8,
  AR_STATUS_PANIC = 9,
} ArStatus;

typedef enum ArDescriptor {
  AR_DESCRIPTOR_PATCH = 0,
  AR_DESCRIPTOR_ORACLE = 1,
} ArDescriptor;

/**
 * Opaque pipeline configuration.
 */
typedef struct ArConfig ArConfig;

/**
 * Opaque result of a registration run.
 */
typedef struct ArRegistration ArRegistration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ar_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *ar_last_error(void);

/**
 * New configuration with default values.
 */
struct ArConfig *ar_config_new(void);

/**
 * Loads a TOML configuration file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ArStatus ar_config_load(const char *path, struct ArConfig **out);

/**
 * # Safety
 * `cfg` must come from this library or be null.
 */
enum ArStatus ar_config_set_seed(struct ArConfig *cfg, uint64_t seed);

/**
 * Sets the inner and outer iteration counts.
 *
 * # Safety
 * `cfg` must come from this library or be null.
 */
enum ArStatus ar_config_set_iterations(struct ArConfig *cfg, size_t inner, size_t outer);

/**
 * # Safety
 * `cfg` must come from this library or be null; it is invalid afterwards.
 */
void ar_config_free(struct ArConfig *cfg);

/**
 * Registers `frames` frames of the clip directory (`start`, `start +
 * stride`, …) and stores the result in `*out`. `descriptor` is an
 * `ArDescriptor` value; `cfg` may be null for defaults.
 *
 * # Safety
 * `clip` must be a NUL-terminated string, `cfg` null or from this
 * library, `out` a valid pointer.
 */
enum ArStatus ar_register_clip(const char *clip,
                               const struct ArConfig *cfg,
                               uint32_t descriptor,
                               size_t frames,
                               size_t stride,
                               size_t start,
                               struct ArRegistration **out);

/**
 * # Safety
 * `reg` must come from this library or be null.
 */
size_t ar_registration_frame_count(const struct ArRegistration *reg);

/**
 * Writes the pose of `frame` to `out16`.
 *
 * # Safety
 * `reg` must come from this library; `out16` must hold 16 doubles.
 */
enum ArStatus ar_registration_pose(const struct ArRegistration *reg, size_t frame, double *out16);

/**
 * Total number of output correspondences over all frame pairs.
 *
 * # Safety
 * `reg` must come from this library or be null.
 */
size_t ar_registration_correspondence_count(const struct ArRegistration *reg);

/**
 * Writes the TUM trajectory and the correspondence dump into `dir`.
 *
 * # Safety
 * `reg` must come from this library; `dir` a NUL-terminated string.
 */
enum ArStatus ar_registration_write(const struct ArRegistration *reg, const char *dir);

/**
 * # Safety
 * `reg` must come from this library or be null; it is invalid afterwards.
 */
void ar_registration_free(struct ArRegistration *reg);

/**
 * Weighted rigid alignment `target ≈ R · source + t` of `n` point pairs
 * (`target` and `source` are `n × 3` row-major). Writes the 4×4 transform
 * to `out16`.
 *
 * # Safety
 * `target`, `source` must hold `3n` doubles, `weights` `n`, `out16` 16.
 */
enum ArStatus ar_weighted_kabsch(const double *target,
                                 const double *source,
                                 const double *weights,
                                 size_t n,
                                 double *out16);

/**
 * Slack-augmented Sinkhorn on a `rows × cols` row-major score matrix.
 * Writes the `(rows + 1) × (cols + 1)` row-major transport plan to `out`;
 * the last row and column are the slack bins.
 *
 * # Safety
 * `scores` must hold `rows · cols` doubles and `out` `(rows + 1)(cols + 1)`.
 */
enum ArStatus ar_sinkhorn(const double *scores,
                          size_t rows,
                          size_t cols,
                          double epsilon,
                          size_t iters,
                          double slack_score,
                          double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ANCHORREG_H */
