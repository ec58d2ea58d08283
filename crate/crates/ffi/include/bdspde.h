#ifndef BDSPDE_H
#define BDSPDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BdsStatus {
  BDS_STATUS_OK = 0,
  BDS_STATUS_NULL_POINTER = 1,
  BDS_STATUS_INVALID_ARGUMENT = 2,
  BDS_STATUS_CONFIG = 3,
  BDS_STATUS_IO = 4,
  BDS_STATUS_BLOW_UP = 5,
  BDS_STATUS_RUNTIME = 6,
  BDS_STATUS_VALIDATION_FAILED = 7,
  BDS_STATUS_PANIC = 8,
} BdsStatus;

typedef enum BdsVerdict {
  BDS_VERDICT_EXTINCT_V = 0,
  BDS_VERDICT_PERMANENT_UV = 1,
  BDS_VERDICT_INDETERMINATE = 2,
} BdsVerdict;

typedef enum BdsSeries {
  BDS_SERIES_INT_U = 0,
  BDS_SERIES_INT_V = 1,
  BDS_SERIES_INT_U2 = 2,
  BDS_SERIES_INT_V2 = 3,
  BDS_SERIES_INT_INV_U = 4,
} BdsSeries;

// Reduced ensemble statistics with the configuration that produced them.
typedef struct BdsEnsemble BdsEnsemble;

// Parsed experiment configuration.
typedef struct BdsExperiment BdsExperiment;

typedef struct BdsThresholds {
  double extinction_margin;
  double h0;
  double r0;
  double delta;
  double delta_hat;
  enum BdsVerdict verdict;
} BdsThresholds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Last error message on this thread, or null. Valid until the next failing call.
const char *bds_last_error(void);

// Crate version as a static NUL-terminated string.
const char *bds_version(void);

enum BdsStatus bds_experiment_parse(const char *text, struct BdsExperiment **out);

enum BdsStatus bds_experiment_load(const char *path, struct BdsExperiment **out);

void bds_experiment_free(struct BdsExperiment *exp);

enum BdsStatus bds_experiment_set_seed(struct BdsExperiment *exp, uint64_t seed);

enum BdsStatus bds_experiment_set_ensemble_size(struct BdsExperiment *exp, size_t size);

enum BdsStatus bds_thresholds(const struct BdsExperiment *exp, struct BdsThresholds *out);

// Runs the ensemble on `threads` workers (0 uses the default pool).
enum BdsStatus bds_run_ensemble(const struct BdsExperiment *exp,
                                size_t threads,
                                struct BdsEnsemble **out);

void bds_ensemble_free(struct BdsEnsemble *ens);

// Number of recorded times; 0 for a null handle.
size_t bds_ensemble_len(const struct BdsEnsemble *ens);

size_t bds_ensemble_trajectories(const struct BdsEnsemble *ens);

double bds_ensemble_max_relative_clip(const struct BdsEnsemble *ens);

// Copies the recorded times into `times[0..len]`; `len` must equal
// [`bds_ensemble_len`].
enum BdsStatus bds_ensemble_times(const struct BdsEnsemble *ens, double *times, size_t len);

// Copies mean and standard error of one series; either buffer may be null
// to skip it.
enum BdsStatus bds_ensemble_series(const struct BdsEnsemble *ens,
                                   enum BdsSeries series,
                                   double *mean,
                                   double *std_err,
                                   size_t len);

enum BdsStatus bds_ensemble_write_csv(const struct BdsEnsemble *ens, const char *path);

// Applies the Neumann heat semigroup `e^{t d Δ}` to `len` grid values.
// `input` and `output` may alias.
enum BdsStatus bds_apply_semigroup(const double *input,
                                   double *output,
                                   size_t len,
                                   double diffusivity,
                                   double time);

// Runs the validation suite; `passed` receives 1 or 0. The status is
// `ValidationFailed` when any check fails.
enum BdsStatus bds_validate(size_t ensemble_size, uint64_t seed, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BDSPDE_H */
