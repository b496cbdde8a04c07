#ifndef HENGRC_H
#define HENGRC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum HengrcStatus {
  HENGRC_STATUS_OK = 0,
  HENGRC_STATUS_NULL_POINTER = 1,
  HENGRC_STATUS_INVALID_CONFIG = 2,
  HENGRC_STATUS_DIMENSION_MISMATCH = 3,
  HENGRC_STATUS_SERIES_TOO_SHORT = 4,
  HENGRC_STATUS_SINGULAR_SYSTEM = 5,
  HENGRC_STATUS_BLOW_UP = 6,
  HENGRC_STATUS_FORMAT = 7,
  HENGRC_STATUS_IO = 8,
  HENGRC_STATUS_INVALID_STRING = 9,
  HENGRC_STATUS_PANIC = 10,
} HengrcStatus;

/**
 * Target convention of a readout.
 */
typedef enum HengrcTarget {
  HENGRC_TARGET_NEXT_STATE = 0,
  HENGRC_TARGET_DELTA = 1,
} HengrcTarget;

/**
 * A trained readout.
 */
typedef struct HengrcModel HengrcModel;

/**
 * A `Q x T` trajectory.
 */
typedef struct HengrcSeries HengrcSeries;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hengrc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hengrc_version(void);

/**
 * Copies `q * len` values, state by state (`data[t * q + i]`), into a new series.
 *
 * # Safety
 * `data` must point to `q * len` readable doubles; `out` must be writable.
 */
enum HengrcStatus hengrc_series_new(size_t q,
                                    size_t len,
                                    double dt,
                                    const double *data,
                                    struct HengrcSeries **out);

/**
 * Lorenz trajectory of `steps + 1` states; identical to trial 0 of an
 * experiment with root `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HengrcStatus hengrc_generate_lorenz(size_t steps,
                                         double dt,
                                         uint64_t seed,
                                         struct HengrcSeries **out);

/**
 * Kuramoto-Sivashinsky trajectory on `q` points of a domain of length `l`.
 *
 * # Safety
 * `out` must be writable.
 */
enum HengrcStatus hengrc_generate_ks(double l,
                                     size_t q,
                                     double dt,
                                     size_t steps,
                                     uint64_t seed,
                                     struct HengrcSeries **out);

/**
 * Reads a `.ccts` or `.csv` trajectory.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HengrcStatus hengrc_series_load(const char *path, struct HengrcSeries **out);

/**
 * Writes a trajectory; the format follows the extension (`.csv`, else CCTS).
 *
 * # Safety
 * `series` must be a live handle and `path` a NUL-terminated string.
 */
enum HengrcStatus hengrc_series_save(const struct HengrcSeries *series, const char *path);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
size_t hengrc_series_dim(const struct HengrcSeries *series);

/**
 * Number of states, or 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
size_t hengrc_series_len(const struct HengrcSeries *series);

/**
 * Time step, or 0 for a null handle.
 *
 * # Safety
 * `series` must be null or a live handle.
 */
double hengrc_series_dt(const struct HengrcSeries *series);

/**
 * Copies the values, state by state, into `buf`, which must hold at least
 * `dim * len` doubles.
 *
 * # Safety
 * `buf` must point to `buf_len` writable doubles.
 */
enum HengrcStatus hengrc_series_copy(const struct HengrcSeries *series,
                                     double *buf,
                                     size_t buf_len);

/**
 * # Safety
 * `series` must be null or a handle not yet freed.
 */
void hengrc_series_free(struct HengrcSeries *series);

/**
 * Trains a model described by a TOML document with a `[model]` table (as in
 * the CLI's `[train.model]`) and an optional `[readout]` table. Feature
 * maps take their input dimension from the series.
 *
 * # Safety
 * `series` must be a live handle, `config_toml` NUL-terminated, `out` writable.
 */
enum HengrcStatus hengrc_train(const struct HengrcSeries *series,
                               const char *config_toml,
                               struct HengrcModel **out);

/**
 * HENG-RC with `k` delay blocks starting at delay `offset`.
 *
 * # Safety
 * `series` must be a live handle and `out` writable.
 */
enum HengrcStatus hengrc_train_heng(const struct HengrcSeries *series,
                                    size_t k,
                                    size_t offset,
                                    double lambda,
                                    enum HengrcTarget target,
                                    bool normalize,
                                    struct HengrcModel **out);

/**
 * Closed-loop forecast of `steps` states after the end of `warmup`. A
 * forecast stopped by the blow-up guard is returned shorter than `steps`.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum HengrcStatus hengrc_model_predict(const struct HengrcModel *model,
                                       const struct HengrcSeries *warmup,
                                       size_t steps,
                                       struct HengrcSeries **out);

/**
 * Feature count or reservoir size, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t hengrc_model_states(const struct HengrcModel *model);

/**
 * # Safety
 * `model` must be a live handle and `path` NUL-terminated.
 */
enum HengrcStatus hengrc_model_save(const struct HengrcModel *model, const char *path);

/**
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum HengrcStatus hengrc_model_load(const char *path, struct HengrcModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void hengrc_model_free(struct HengrcModel *model);

/**
 * Steps before the normalized error first reaches `theta`, scored over the
 * length of `truth`. Steps missing from a short prediction count as diverged.
 *
 * # Safety
 * Handles must be live and `out` writable.
 */
enum HengrcStatus hengrc_valid_steps(const struct HengrcSeries *truth,
                                     const struct HengrcSeries *prediction,
                                     double theta,
                                     size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HENGRC_H */
