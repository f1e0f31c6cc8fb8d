#ifndef MBN_H
#define MBN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

#define MBN_METRIC_EUCLIDEAN 0

#define MBN_METRIC_COSINE 1

#define MBN_MODE_SO 0

#define MBN_MODE_SD 1

#define MBN_MODE_RSO 2

#define MBN_CRITERION_SWC 0

#define MBN_CRITERION_PB 1

#define MBN_CRITERION_PBM 2

#define MBN_CRITERION_VRC 3

// Result of every fallible call. Values 2 to 13 mirror the library's error
// classes and the CLI exit codes.
typedef enum MbnStatus {
  MBN_STATUS_OK = 0,
  MBN_STATUS_PARSE = 2,
  MBN_STATUS_INVALID_DATASET = 3,
  MBN_STATUS_INVALID_CODE = 4,
  MBN_STATUS_FORMAT = 5,
  MBN_STATUS_DIMENSION_MISMATCH = 6,
  MBN_STATUS_ZERO_VARIANCE = 7,
  MBN_STATUS_SCHEDULE = 8,
  MBN_STATUS_CONFIG = 9,
  MBN_STATUS_CRITERION_UNDEFINED = 10,
  MBN_STATUS_SHAPE = 11,
  MBN_STATUS_IO = 12,
  MBN_STATUS_JSON = 13,
  MBN_STATUS_NULL_POINTER = 20,
  MBN_STATUS_INVALID_ARGUMENT = 21,
  MBN_STATUS_BUFFER_TOO_SMALL = 22,
  MBN_STATUS_PANIC = 23,
} MbnStatus;

// Opaque dataset handle.
typedef struct MbnDataset MbnDataset;

// Opaque trained ensemble.
typedef struct MbnEnsemble MbnEnsemble;

// Opaque selection result.
typedef struct MbnSelection MbnSelection;

// Ensemble training options. Zero in `top_k` means `round(1.5 c)` from
// the dataset labels.
typedef struct MbnEnsembleOptions {
  size_t models;
  size_t units_per_layer;
  double delta_min;
  double delta_max;
  double bottom_fraction;
  double feature_ratio;
  size_t top_k;
  uint64_t seed;
} MbnEnsembleOptions;

// Selection options. Zero in `b` or `embed_dim` takes the default; `classes`
// is required by SO and rSO and ignored by SD.
typedef struct MbnSelectionOptions {
  uint32_t mode;
  uint32_t criterion;
  size_t b;
  size_t classes;
  size_t embed_dim;
} MbnSelectionOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into this library on the same thread.
const char *mbn_last_error(void);

// Library version as a static NUL-terminated string.
const char *mbn_version(void);

// Builds a dataset from a row-major `n x d` matrix. `labels` may be null;
// otherwise it holds `n` arbitrary integer class ids.
//
// # Safety
// `features` must point to `n * d` doubles and `labels`, when not null, to
// `n` integers. `out` must be a valid pointer.
enum MbnStatus mbn_dataset_new(const double *features,
                               size_t n,
                               size_t d,
                               const int64_t *labels,
                               uint32_t metric,
                               struct MbnDataset **out);

// Reads a comma-separated file without header. `label_column` is a
// zero-based column index, or negative for no labels.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum MbnStatus mbn_dataset_load_csv(const char *path,
                                    int64_t label_column,
                                    uint32_t metric,
                                    struct MbnDataset **out);

// Number of points, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t mbn_dataset_n(const struct MbnDataset *ds);

// Number of features, or 0 for a null handle.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t mbn_dataset_d(const struct MbnDataset *ds);

// Number of classes in the labels, or 0 when unlabeled.
//
// # Safety
// `ds` must be null or a live dataset handle.
size_t mbn_dataset_classes(const struct MbnDataset *ds);

// # Safety
// `ds` must be null or a handle not freed before.
void mbn_dataset_free(struct MbnDataset *ds);

// Fills `out` with the default options: 40 models, 400 clusterings per
// layer, delta drawn from [0.05, 0.95], bottom fraction 0.5, all features.
//
// # Safety
// `out` must be null or point to writable options.
void mbn_ensemble_options_default(struct MbnEnsembleOptions *out);

// Trains an ensemble on `ds`.
//
// # Safety
// `ds` and `options` must be live, `out` a valid pointer.
enum MbnStatus mbn_ensemble_train(const struct MbnDataset *ds,
                                  const struct MbnEnsembleOptions *options,
                                  struct MbnEnsemble **out);

// # Safety
// `ens` must be live and `dir` a NUL-terminated string.
enum MbnStatus mbn_ensemble_save(const struct MbnEnsemble *ens, const char *dir);

// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
enum MbnStatus mbn_ensemble_load(const char *dir, struct MbnEnsemble **out);

// Number of base models, or 0 for a null handle.
//
// # Safety
// `ens` must be null or live.
size_t mbn_ensemble_models(const struct MbnEnsemble *ens);

// Copies each base model's `delta` into `out`.
//
// # Safety
// `ens` must be live and `out` hold `len` doubles.
enum MbnStatus mbn_ensemble_deltas(const struct MbnEnsemble *ens, double *out, size_t len);

// # Safety
// `ens` must be null or a handle not freed before.
void mbn_ensemble_free(struct MbnEnsemble *ens);

// Weights the ensemble's base models, keeps the best `B` and reduces their
// joint output.
//
// # Safety
// `ens` and `options` must be live, `out` a valid pointer.
enum MbnStatus mbn_select(const struct MbnEnsemble *ens,
                          const struct MbnSelectionOptions *options,
                          struct MbnSelection **out);

// Number of weights (one per base model), or 0 for a null handle.
//
// # Safety
// `sel` must be null or live.
size_t mbn_selection_models(const struct MbnSelection *sel);

// # Safety
// `sel` must be live and `out` hold `len` doubles.
enum MbnStatus mbn_selection_weights(const struct MbnSelection *sel, double *out, size_t len);

// Number of kept models, or 0 for a null handle.
//
// # Safety
// `sel` must be null or live.
size_t mbn_selection_chosen_count(const struct MbnSelection *sel);

// Indices of the kept models, best first.
//
// # Safety
// `sel` must be live and `out` hold `len` entries.
enum MbnStatus mbn_selection_chosen(const struct MbnSelection *sel, size_t *out, size_t len);

// Writes the embedding's point count and dimension.
//
// # Safety
// `sel` must be live; `n` and `h` must be valid pointers.
enum MbnStatus mbn_selection_embedding_shape(const struct MbnSelection *sel, size_t *n, size_t *h);

// Copies the row-major `n x h` embedding of the kept models.
//
// # Safety
// `sel` must be live and `out` hold `len` doubles.
enum MbnStatus mbn_selection_embedding(const struct MbnSelection *sel, double *out, size_t len);

// # Safety
// `sel` must be null or a handle not freed before.
void mbn_selection_free(struct MbnSelection *sel);

// Clusters a row-major `n x h` embedding into `classes` groups with
// average-linkage Euclidean AHC and writes labels in `[0, classes)`.
//
// # Safety
// `embedding` must hold `n * h` doubles and `labels_out` `n` entries.
enum MbnStatus mbn_cluster(const double *embedding,
                           size_t n,
                           size_t h,
                           size_t classes,
                           size_t *labels_out);

// Clustering accuracy of `pred` against `truth` under the best one-to-one
// relabeling. Labels are arbitrary integers.
//
// # Safety
// `pred` and `truth` must hold `n` integers and `acc` be a valid pointer.
enum MbnStatus mbn_accuracy(const int64_t *pred, const int64_t *truth, size_t n, double *acc);

// Runs a full experiment from a JSON config and returns the JSON report,
// to be released with [`mbn_string_free`].
//
// # Safety
// `config_json` must be a NUL-terminated string and `report_out` a valid
// pointer.
enum MbnStatus mbn_run_experiment(const char *config_json, char **report_out);

// # Safety
// `s` must be null or a string returned by this library and not freed.
void mbn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MBN_H */
