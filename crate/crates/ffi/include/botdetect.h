#ifndef BOTDETECT_H
#define BOTDETECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

// Result code of every fallible call.
typedef enum BdStatus {
  BD_STATUS_OK = 0,
  BD_STATUS_NULL_POINTER = 1,
  BD_STATUS_INVALID_ARGUMENT = 2,
  BD_STATUS_IO = 3,
  BD_STATUS_PARSE = 4,
  BD_STATUS_INVALID_DATA = 5,
  BD_STATUS_NUMERIC = 6,
  BD_STATUS_PANIC = 7,
} BdStatus;

// Labeled dataset handle.
typedef struct BdDataset BdDataset;

// Fitted Gaussian-process handle.
typedef struct BdGp BdGp;

// Fitted decision tree handle.
typedef struct BdTree BdTree;

// Tree hyperparameters; defaults from `bd_hyper_params_default`.
typedef struct BdHyperParams {
  size_t max_depth;
  size_t min_samples_split;
  size_t min_samples_leaf;
  double max_features_fraction;
} BdHyperParams;

typedef struct BdMetrics {
  double accuracy;
  double precision;
  double recall;
  double f_score;
} BdMetrics;

// Confusion counts (attack = positive) and metrics for both classes.
typedef struct BdReport {
  size_t tp;
  size_t tn;
  size_t fp;
  size_t fn_;
  struct BdMetrics attack;
  struct BdMetrics normal;
  double macro_f_score;
} BdReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failing call on this thread; empty after a success.
//
// The pointer stays valid until the next call into this library on the same thread.
const char *bd_last_error(void);

// Library version as a static NUL-terminated string.
const char *bd_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void bd_string_free(char *s);

// Loads a labeled CSV file. `negative_label` and `features` may be NULL;
// `features` is a comma-separated include-list.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum BdStatus bd_dataset_load(const char *path,
                              const char *label_column,
                              const char *positive_label,
                              const char *negative_label,
                              const char *features,
                              struct BdDataset **out);

// Builds a dataset from a row-major `rows × cols` matrix and 0/1 labels
// (1 = attack). Both buffers are copied.
//
// # Safety
// `features` must hold `rows * cols` values and `labels` `rows` values.
enum BdStatus bd_dataset_from_arrays(const double *features,
                                     const uint8_t *labels,
                                     size_t rows,
                                     size_t cols,
                                     struct BdDataset **out);

// Number of rows; 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bd_dataset_rows(const struct BdDataset *ds);

// Number of feature columns; 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bd_dataset_cols(const struct BdDataset *ds);

// Rows labeled `label` (0 = normal, 1 = attack); 0 for NULL.
//
// # Safety
// `ds` must be NULL or a live dataset handle.
size_t bd_dataset_class_count(const struct BdDataset *ds, uint8_t label);

// Copies row-major features into `buf`, which must hold `rows * cols` values.
//
// # Safety
// `buf` must be writable for `len` values.
enum BdStatus bd_dataset_copy_features(const struct BdDataset *ds, double *buf, size_t len);

// Copies labels into `buf`, which must hold `rows` values.
//
// # Safety
// `buf` must be writable for `len` values.
enum BdStatus bd_dataset_copy_labels(const struct BdDataset *ds, uint8_t *buf, size_t len);

// Min-max scales `ds` with bounds fitted on itself into a new dataset.
//
// # Safety
// `ds` must be a live handle and `out` writable.
enum BdStatus bd_dataset_minmax(const struct BdDataset *ds, struct BdDataset **out);

// SMOTE-oversamples the minority class into a new dataset.
//
// # Safety
// `ds` must be a live handle and `out` writable.
enum BdStatus bd_dataset_smote(const struct BdDataset *ds,
                               size_t k,
                               double target_ratio,
                               uint64_t seed,
                               struct BdDataset **out);

// Releases a dataset. NULL is ignored.
//
// # Safety
// `ds` must be NULL or a handle not yet freed.
void bd_dataset_free(struct BdDataset *ds);

struct BdHyperParams bd_hyper_params_default(void);

// Fits a Gini decision tree. `hp` may be NULL for defaults.
//
// # Safety
// `ds` must be a live handle, `hp` NULL or readable, `out` writable.
enum BdStatus bd_tree_fit(const struct BdDataset *ds,
                          const struct BdHyperParams *hp,
                          uint64_t seed,
                          struct BdTree **out);

// Predicts the class of one row of `n_features` values.
//
// # Safety
// `row` must hold `n_features` values; `out` must be writable.
enum BdStatus bd_tree_predict(const struct BdTree *tree,
                              const double *row,
                              size_t n_features,
                              uint8_t *out);

// Predicts every row of a row-major `rows × cols` matrix into `out[rows]`.
//
// # Safety
// `features` must hold `rows * cols` values; `out` must hold `rows`.
enum BdStatus bd_tree_predict_batch(const struct BdTree *tree,
                                    const double *features,
                                    size_t rows,
                                    size_t cols,
                                    uint8_t *out);

// Depth of the tree (a lone leaf has depth 0); 0 for NULL.
//
// # Safety
// `tree` must be NULL or a live handle.
size_t bd_tree_depth(const struct BdTree *tree);

// Number of leaves; 0 for NULL.
//
// # Safety
// `tree` must be NULL or a live handle.
size_t bd_tree_leaves(const struct BdTree *tree);

// Releases a tree. NULL is ignored.
//
// # Safety
// `tree` must be NULL or a handle not yet freed.
void bd_tree_free(struct BdTree *tree);

// Scores `n` predictions against ground truth (labels 0/1, 1 = attack).
//
// # Safety
// `y_true` and `y_pred` must hold `n` values; `out` must be writable.
enum BdStatus bd_evaluate(const uint8_t *y_true,
                          const uint8_t *y_pred,
                          size_t n,
                          struct BdReport *out);

// Fits an RBF Gaussian process to `t` row-major points of dimension `d`.
//
// # Safety
// `x` must hold `t * d` values and `y` `t` values; `out` must be writable.
enum BdStatus bd_gp_fit(const double *x,
                        const double *y,
                        size_t t,
                        size_t d,
                        double signal_variance,
                        double lengthscale,
                        double noise,
                        struct BdGp **out);

// Posterior mean and variance at one query point of dimension `d`.
//
// # Safety
// `q` must hold `d` values; `mean` and `variance` must be writable.
enum BdStatus bd_gp_predict(const struct BdGp *gp,
                            const double *q,
                            size_t d,
                            double *mean,
                            double *variance);

// Log marginal likelihood of the training targets; NaN for NULL.
//
// # Safety
// `gp` must be NULL or a live handle.
double bd_gp_log_marginal_likelihood(const struct BdGp *gp);

// Releases a GP. NULL is ignored.
//
// # Safety
// `gp` must be NULL or a handle not yet freed.
void bd_gp_free(struct BdGp *gp);

// Expected improvement over `best + xi` of a normal posterior (maximization).
double bd_expected_improvement(double mean, double std, double best, double xi);

// Runs the full pipeline from a TOML config; `seed` overrides the file.
// On success `*report` receives the text report; free it with `bd_string_free`.
//
// # Safety
// `config_toml` must be NUL-terminated; `report` must be writable.
enum BdStatus bd_run_pipeline(const char *config_toml, uint64_t seed, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOTDETECT_H */
