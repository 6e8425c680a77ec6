#ifndef CIRCGP_H
#define CIRCGP_H

/* Generated by cbindgen from circgp-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define CGP_OK 0

/**
 * Validation failure: bad configuration, arguments, or data.
 */
#define CGP_ERR_VALIDATION 2

/**
 * Numeric failure: factorization or sampling left its domain.
 */
#define CGP_ERR_NUMERIC 3

/**
 * A required pointer argument was null.
 */
#define CGP_ERR_NULL 4

/**
 * A string argument was not valid UTF-8.
 */
#define CGP_ERR_UTF8 5

/**
 * An internal panic was caught at the boundary.
 */
#define CGP_ERR_PANIC 6

/**
 * Direction column is radians (`cgp_dataset_read` unit selector).
 */
#define CGP_UNIT_INFER 0

#define CGP_UNIT_RADIANS 1

#define CGP_UNIT_DEGREES 2

/**
 * An ingested circular dataset (opaque).
 */
typedef struct CgpDataset CgpDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer is
 * owned by the library and stays valid until the next API call on the
 * same thread; it is never null (initially the empty string).
 */
const char *cgp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cgp_version(void);

/**
 * Read a dataset CSV (columns `site_id,x,y[,time],direction[,speed]`).
 *
 * `angle_unit` is one of `CGP_UNIT_INFER`, `CGP_UNIT_RADIANS`,
 * `CGP_UNIT_DEGREES`; `rotate_half_turn` and `assert_planar` are
 * booleans (0/1). On success `*out` owns the dataset and must be
 * released with [`cgp_dataset_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid
 * pointer to a `CgpDataset*` slot.
 */
int cgp_dataset_read(const char *path,
                     int angle_unit,
                     int rotate_half_turn,
                     int assert_planar,
                     struct CgpDataset **out);

/**
 * Number of rows in the dataset; writes it to `*out`.
 *
 * # Safety
 * `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
 */
int cgp_dataset_len(const struct CgpDataset *ds, size_t *out);

/**
 * Angle (radians in `[0, 2π)`) of row `index`; writes it to `*out`.
 *
 * # Safety
 * `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
 */
int cgp_dataset_angle(const struct CgpDataset *ds, size_t index, double *out);

/**
 * Circular mean direction of the dataset; writes it to `*out`.
 *
 * # Safety
 * `ds` must come from [`cgp_dataset_read`]; `out` must be valid.
 */
int cgp_dataset_mean_direction(const struct CgpDataset *ds, double *out);

/**
 * Release a dataset handle. Null is ignored.
 *
 * # Safety
 * `ds` must be null or a pointer from [`cgp_dataset_read`] not yet
 * freed; it must not be used afterwards.
 */
void cgp_dataset_free(struct CgpDataset *ds);

/**
 * Generate a synthetic dataset from the config's `[simulate]` block.
 *
 * # Safety
 * `config_path` and `out_path` must be NUL-terminated strings.
 */
int cgp_simulate(const char *config_path, const char *out_path);

/**
 * Fit the configured model. `data_path` may be null to use the
 * config's `data.path`; `warm_start != 0` continues the run already in
 * `out_dir`.
 *
 * # Safety
 * All non-null pointers must be NUL-terminated strings.
 */
int cgp_fit(const char *config_path, const char *data_path, const char *out_dir, int warm_start);

/**
 * Krige the posterior in `draws_dir` onto `targets_path`.
 * `seed_override < 0` keeps the fit's seed; `keep_samples != 0` also
 * writes the full predictive sample matrix.
 *
 * # Safety
 * All pointers must be NUL-terminated strings.
 */
int cgp_predict(const char *draws_dir,
                const char *data_path,
                const char *targets_path,
                const char *out_dir,
                int64_t seed_override,
                int keep_samples);

/**
 * Write the PSRF/MPSRF report for a stored run. `out_path` may be null
 * for the default location inside the run directory.
 *
 * # Safety
 * Non-null pointers must be NUL-terminated strings.
 */
int cgp_diagnose(const char *draws_dir, const char *out_path);

/**
 * Score stored predictions against a held-out truth dataset. `out_dir`
 * may be null to write next to the predictions.
 *
 * # Safety
 * Non-null pointers must be NUL-terminated strings.
 */
int cgp_score(const char *pred_dir,
              const char *truth_path,
              const char *out_dir,
              double max_match_distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCGP_H */
