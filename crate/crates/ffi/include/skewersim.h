#ifndef SKEWERSIM_H
#define SKEWERSIM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Side length of policy input images.
 */
#define SK_IMAGE_SIZE 32

/**
 * Samples in a haptic trace.
 */
#define SK_TRACE_LEN 26

typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_CONFIG = 3,
  SK_STATUS_IO = 4,
  SK_STATUS_CHECKPOINT = 5,
  SK_STATUS_RUNTIME = 6,
  SK_STATUS_PANIC = 7,
} SkStatus;

typedef enum SkMode {
  SK_MODE_MULTIMODAL = 0,
  SK_MODE_VISION_ONLY = 1,
  SK_MODE_HAPTIC_ONLY = 2,
  SK_MODE_OPEN_LOOP = 3,
} SkMode;

/**
 * Primitive chosen by a policy.
 */
typedef enum SkPrimitive {
  SK_PRIMITIVE_VERTICAL_SKEWER = 0,
  SK_PRIMITIVE_ANGLED_SKEWER = 1,
} SkPrimitive;

/**
 * A spawned plate.
 */
typedef struct SkPlate SkPlate;

/**
 * Plate specification plus the archetype table it draws from.
 */
typedef struct SkPlateSpec SkPlateSpec;

/**
 * Trained primitive-selection policy.
 */
typedef struct SkPolicy SkPolicy;

/**
 * Plate-clearing tallies.
 */
typedef struct SkMetrics {
  uint32_t items_acquired;
  uint32_t total_attempts;
  uint32_t miss;
  uint32_t drop;
  uint32_t unstable;
  uint32_t damage;
  uint32_t detection;
  uint32_t exceeded_retries;
  double success_rate;
} SkMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the calling thread's last failure. The pointer stays
 * valid until the next failing call on this thread.
 */
const char *sk_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sk_version(void);

/**
 * Loads a policy checkpoint written by `skewersim train`.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum SkStatus sk_policy_load(const char *path, struct SkPolicy **out);

/**
 * Untrained policy with seeded initial weights.
 *
 * # Safety
 * `out` must be writable.
 */
enum SkStatus sk_policy_new(enum SkMode mode, uint64_t seed, struct SkPolicy **out);

/**
 * # Safety
 * `policy` must come from `sk_policy_load`/`sk_policy_new` or be null.
 */
void sk_policy_free(struct SkPolicy *policy);

/**
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum SkStatus sk_policy_mode(const struct SkPolicy *policy, enum SkMode *out);

/**
 * Chooses a primitive.
 *
 * `image` is `SK_IMAGE_SIZE * SK_IMAGE_SIZE * 3` row-major interleaved RGB
 * values in [0, 1]; `trace` is `SK_TRACE_LEN` force samples in newtons.
 * Either may be null when the policy's mode does not read it. `probs` receives the
 * (vertical, angled) probabilities and may be null.
 *
 * # Safety
 * Non-null pointers must reference arrays of at least `image_len` /
 * `trace_len` values, and `probs` two writable values.
 */
enum SkStatus sk_policy_infer(struct SkPolicy *policy,
                              const double *image,
                              size_t image_len,
                              const double *trace,
                              size_t trace_len,
                              enum SkPrimitive *out,
                              double *probs);

/**
 * Maximum relative error of a finite-difference gradient check on one
 * random input.
 *
 * # Safety
 * `policy` must be a live handle; `out` must be writable.
 */
enum SkStatus sk_policy_gradcheck(struct SkPolicy *policy, uint64_t seed, double *out);

/**
 * Number of built-in evaluation plate specs.
 */
size_t sk_evaluation_plate_count(void);

/**
 * One of the built-in evaluation plates, with the bundled archetypes.
 *
 * # Safety
 * `out` must be writable.
 */
enum SkStatus sk_plate_spec_evaluation(size_t index, struct SkPlateSpec **out);

/**
 * Plate spec from JSON, with the bundled archetypes.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum SkStatus sk_plate_spec_from_json(const char *json, struct SkPlateSpec **out);

/**
 * # Safety
 * `spec` must come from an `sk_plate_spec_*` constructor or be null.
 */
void sk_plate_spec_free(struct SkPlateSpec *spec);

/**
 * # Safety
 * `spec` must be a live handle; `out` must be writable.
 */
enum SkStatus sk_plate_spawn(const struct SkPlateSpec *spec, uint64_t seed, struct SkPlate **out);

/**
 * # Safety
 * `plate` must come from `sk_plate_spawn` or be null.
 */
void sk_plate_free(struct SkPlate *plate);

/**
 * Items on the plate, or 0 for a null handle.
 *
 * # Safety
 * `plate` must be a live handle or null.
 */
size_t sk_plate_item_count(const struct SkPlate *plate);

/**
 * Clears one plate with default trial settings. A null `policy` selects
 * the ground-truth oracle.
 *
 * # Safety
 * `spec` must be a live handle, `policy` live or null, `out` writable.
 */
enum SkStatus sk_run_plate(const struct SkPlateSpec *spec,
                           struct SkPolicy *policy,
                           uint64_t seed,
                           uint32_t max_retries,
                           struct SkMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWERSIM_H */
