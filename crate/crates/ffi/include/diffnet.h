#ifndef DIFFNET_H
#define DIFFNET_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum diffnet_status {
  DIFFNET_STATUS_OK = 0,
  DIFFNET_STATUS_NULL_POINTER = 1,
  DIFFNET_STATUS_INVALID_ARGUMENT = 2,
  DIFFNET_STATUS_DIMENSION = 3,
  DIFFNET_STATUS_NUMERICAL = 4,
  DIFFNET_STATUS_DEGENERATE_LABELS = 5,
  DIFFNET_STATUS_IO = 6,
  DIFFNET_STATUS_PANIC = 7,
  DIFFNET_STATUS_OTHER = 8,
} diffnet_status;

/**
 * Datasets for the joint model, filled with [`diffnet_design_add_dataset`].
 */
typedef struct diffnet_design diffnet_design;

/**
 * A fitted joint model.
 */
typedef struct diffnet_fit_t diffnet_fit_t;

/**
 * Bootstrap inclusion frequencies.
 */
typedef struct diffnet_psi diffnet_psi;

/**
 * Recovery counts and rates; a rate is NaN when its denominator is zero.
 */
typedef struct diffnet_score {
  size_t tp;
  size_t fp;
  size_t tn;
  size_t fn_;
  double tpr;
  double tnr;
  double tdr;
} diffnet_score;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Owned by the library.
 */
const char *diffnet_last_error(void);

/**
 * Library version, a static string.
 */
const char *diffnet_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void diffnet_string_free(char *s);

/**
 * Minimax concave penalty of `t`.
 *
 * # Safety
 * `value` must be a valid pointer.
 */
enum diffnet_status diffnet_mcp(double t, double lambda, double gamma, double *value);

/**
 * CLIME estimate for a `p x p` covariance at `lambda`. `omega` receives the
 * symmetrized `p x p` estimate.
 *
 * # Safety
 * `sigma` and `omega` must hold `p * p` doubles.
 */
enum diffnet_status diffnet_clime_solve(const double *sigma,
                                        size_t p,
                                        double lambda,
                                        double *omega);

/**
 * # Safety
 * `design` must be a valid pointer.
 */
enum diffnet_status diffnet_design_new(struct diffnet_design **design);

/**
 * Appends one dataset: `n x d` features, `n x l` confounders (may be null
 * when `l = 0`) and `n` labels in {0, 1}.
 *
 * # Safety
 * Arrays must hold the stated number of doubles.
 */
enum diffnet_status diffnet_design_add_dataset(struct diffnet_design *design,
                                               size_t n,
                                               size_t d,
                                               size_t l,
                                               const double *features,
                                               const double *confounders,
                                               const double *labels);

/**
 * # Safety
 * `design` must come from [`diffnet_design_new`] or be null.
 */
void diffnet_design_free(struct diffnet_design *design);

/**
 * `lambda2_max` and `lambda1_max(lambda2)` on standardized features.
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_lambda_max(const struct diffnet_design *design,
                                       double lambda2,
                                       double *lambda2_max,
                                       double *lambda1_max);

/**
 * Fits the joint model with `gamma1 = gamma2 = gamma`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_fit(const struct diffnet_design *design,
                                double lambda1,
                                double lambda2,
                                double gamma,
                                struct diffnet_fit_t **result);

/**
 * Number of features `d` and datasets `M` of a fit, and whether it converged.
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_fit_info(const struct diffnet_fit_t *fit,
                                     size_t *d,
                                     size_t *m,
                                     bool *converged);

/**
 * Copies the `d x M` edge coefficients (original feature scale).
 *
 * # Safety
 * `beta` must hold `len` doubles.
 */
enum diffnet_status diffnet_fit_beta(const struct diffnet_fit_t *fit, double *beta, size_t len);

/**
 * The fit as a JSON document; release with [`diffnet_string_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_fit_to_json(const struct diffnet_fit_t *fit, char **json);

/**
 * # Safety
 * `fit` must come from [`diffnet_fit`] or be null.
 */
void diffnet_fit_free(struct diffnet_fit_t *fit);

/**
 * `folds`-fold cross-validation over the default relative grid
 * (`n_grid x n_grid` values in `[0.05, 1]` of the lambda maxima).
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_cross_validate(const struct diffnet_design *design,
                                           size_t folds,
                                           size_t n_grid,
                                           uint64_t seed,
                                           double *lambda1,
                                           double *lambda2);

/**
 * Runs `replicates` stratified bootstrap fits at a fixed penalty.
 *
 * # Safety
 * Pointers must be valid.
 */
enum diffnet_status diffnet_ensemble(const struct diffnet_design *design,
                                     double lambda1,
                                     double lambda2,
                                     double gamma,
                                     size_t replicates,
                                     uint64_t seed,
                                     struct diffnet_psi **result);

/**
 * Copies the `d x M` inclusion frequencies and reports the number of
 * successful replicates.
 *
 * # Safety
 * `psi_out` must hold `len` doubles; pointers must be valid.
 */
enum diffnet_status diffnet_psi_values(const struct diffnet_psi *psi,
                                       double *psi_out,
                                       size_t len,
                                       size_t *replicates);

/**
 * # Safety
 * `psi` must come from [`diffnet_ensemble`] or be null.
 */
void diffnet_psi_free(struct diffnet_psi *psi);

/**
 * Scores an estimated edge set against the truth over `p` nodes. Edges are
 * zero-based `(i, j)` pairs stored consecutively.
 *
 * # Safety
 * `truth` and `estimate` must hold `2 * n` entries each; `score` must be valid.
 */
enum diffnet_status diffnet_score_support(size_t p,
                                          const size_t *truth,
                                          size_t n_truth,
                                          const size_t *estimate,
                                          size_t n_estimate,
                                          struct diffnet_score *score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFNET_H */
