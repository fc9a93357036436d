#ifndef TSASD_H
#define TSASD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result of a library call.
 */
typedef enum TsasdStatus {
  TSASD_STATUS_OK = 0,
  /*
   A required pointer was null.
   */
  TSASD_STATUS_NULL_POINTER = 1,
  /*
   Bad sizes, lengths or values.
   */
  TSASD_STATUS_INVALID_ARGUMENT = 2,
  /*
   The data cannot support the request (too short, degenerate, ...).
   */
  TSASD_STATUS_DATA = 3,
  /*
   The configuration text was rejected.
   */
  TSASD_STATUS_CONFIG = 4,
  /*
   Malformed JSON or text.
   */
  TSASD_STATUS_PARSE = 5,
  /*
   A panic was caught inside the library.
   */
  TSASD_STATUS_PANIC = 6,
} TsasdStatus;

/*
 A trained pipeline.
 */
typedef struct TsasdPipeline TsasdPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *tsasd_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *tsasd_version(void);

/*
 The default decision threshold, about 0.9772498681.
 */
double tsasd_default_threshold(void);

/*
 Trains a pipeline on a row-major `n_points × dims` standard series.

 `config_toml` may be NULL for defaults; otherwise it uses the same keys as
 the command-line configuration file, and the first listed detector and
 window are used. On success `*out` receives a handle owned by the caller.

 # Safety
 `standard` must point at `n_points * dims` doubles, `config_toml` must be
 NULL or NUL-terminated, and `out` must be writable.
 */
enum TsasdStatus tsasd_pipeline_train(const double *standard,
                                      uintptr_t n_points,
                                      uintptr_t dims,
                                      const char *config_toml,
                                      struct TsasdPipeline **out);

/*
 Scores a row-major `n_points × dims` test series.

 Each of `scores`, `health` and `labels` may be NULL; otherwise it must
 hold `n_points` values. `n_anomalous` (nullable) receives the number of
 points labelled 1.

 # Safety
 `pipeline` must come from this library and not be freed; buffers must be
 valid for the stated lengths.
 */
enum TsasdStatus tsasd_pipeline_test(const struct TsasdPipeline *pipeline,
                                     const double *test,
                                     uintptr_t n_points,
                                     uintptr_t dims,
                                     double *scores,
                                     double *health,
                                     uint8_t *labels,
                                     uintptr_t *n_anomalous);

/*
 Releases a pipeline. NULL is ignored.

 # Safety
 `pipeline` must be NULL or a live handle from this library.
 */
void tsasd_pipeline_free(struct TsasdPipeline *pipeline);

/*
 Serializes a pipeline to JSON; free the result with [`tsasd_string_free`].

 # Safety
 `pipeline` must be a live handle and `out` writable.
 */
enum TsasdStatus tsasd_pipeline_to_json(const struct TsasdPipeline *pipeline, char **out);

/*
 Restores a pipeline from [`tsasd_pipeline_to_json`] output.

 # Safety
 `json` must be NUL-terminated and `out` writable.
 */
enum TsasdStatus tsasd_pipeline_from_json(const char *json, struct TsasdPipeline **out);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must be NULL or a string from this library, freed once.
 */
void tsasd_string_free(char *s);

/*
 Area under the ROC curve of `scores` against 0/1 `labels`. `*out` is NaN
 when the labels hold only one class.

 # Safety
 `scores` and `labels` must hold `n` values and `out` must be writable.
 */
enum TsasdStatus tsasd_auc_roc(const double *scores,
                               const uint8_t *labels,
                               uintptr_t n,
                               double *out);

/*
 Shape-based distance between two length-`m` sequences, in [0, 2].

 # Safety
 `x` and `y` must hold `m` values and `out` must be writable.
 */
enum TsasdStatus tsasd_sbd(const double *x, const double *y, uintptr_t m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSASD_H */
