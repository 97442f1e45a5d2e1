#ifndef SIEVE_H
#define SIEVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define SIEVE_CRITERION_AVERAGE_REWARD 0

#define SIEVE_CRITERION_AVERAGE_DISCOUNTED 1

#define SIEVE_MODE_ABSOLUTE 0

#define SIEVE_MODE_RELATIVE 1

#define SIEVE_ALGORITHM_SUPPORT 0

#define SIEVE_ALGORITHM_BC 1

#define SIEVE_ALGORITHM_EXPECTILE 2

#define SIEVE_KERNEL_GAUSSIAN 0

#define SIEVE_KERNEL_LAPLACIAN 1

// Result of every fallible call.
typedef enum SieveStatus {
  SIEVE_STATUS_OK = 0,
  SIEVE_STATUS_IO = 1,
  SIEVE_STATUS_PARSE = 2,
  SIEVE_STATUS_INVARIANT = 3,
  SIEVE_STATUS_RECORD = 4,
  SIEVE_STATUS_EMPTY_DATASET = 5,
  SIEVE_STATUS_EMPTY_EPISODE = 6,
  // No episode scores above the mean; there is no filtered dataset.
  SIEVE_STATUS_DEGENERATE = 7,
  SIEVE_STATUS_REPORT_MISMATCH = 8,
  SIEVE_STATUS_INVALID_PARAM = 9,
  SIEVE_STATUS_UNSUPPORTED = 10,
  SIEVE_STATUS_NULL_POINTER = 11,
  // A Rust panic was caught at the boundary.
  SIEVE_STATUS_PANIC = 12,
} SieveStatus;

// Opaque dataset handle.
typedef struct SieveDataset SieveDataset;

// Opaque trained model handle.
typedef struct SieveModel SieveModel;

// Opaque filter report handle.
typedef struct SieveReport SieveReport;

// Learner settings; start from `sieve_learner_config_default`.
typedef struct SieveLearnerConfig {
  // One of the `SIEVE_ALGORITHM_*` constants.
  uint32_t algorithm;
  double gamma;
  size_t epochs;
  size_t batch_size;
  double learning_rate;
  double alpha;
  double expectile_tau;
  double awr_temperature;
  uint64_t seed;
} SieveLearnerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL if none. Valid until
// the next failing call on the same thread.
const char *sieve_last_error(void);

// Loads and validates an ORLD file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SieveStatus sieve_dataset_load(const char *path, struct SieveDataset **out);

// Writes a dataset as ORLD, atomically.
//
// # Safety
// `dataset` must be a live handle; `path` a NUL-terminated string.
enum SieveStatus sieve_dataset_save(const struct SieveDataset *dataset, const char *path);

// Rolls out a mixed-quality dataset on a built-in environment.
//
// `env_id` is a name optionally followed by parameters, as in
// `gridworld:n=5,slip=0.1`. Behavior settings take their defaults and the
// episodes are interleaved with `seed`.
//
// # Safety
// `env_id` must be a NUL-terminated string; `out` must be writable.
enum SieveStatus sieve_dataset_generate(const char *env_id,
                                        size_t random_episodes,
                                        size_t medium_episodes,
                                        size_t expert_episodes,
                                        uint64_t seed,
                                        struct SieveDataset **out);

// # Safety
// `dataset` must be NULL or a handle not yet freed.
void sieve_dataset_free(struct SieveDataset *dataset);

// # Safety
// `dataset` must be a live handle; `out` must be writable.
enum SieveStatus sieve_dataset_episode_count(const struct SieveDataset *dataset, size_t *out);

// # Safety
// `dataset` must be a live handle; `out` must be writable.
enum SieveStatus sieve_dataset_transition_count(const struct SieveDataset *dataset, size_t *out);

// Writes the dataset's 16-character hex content digest, NUL-terminated,
// into `buf`. Needs `cap >= 17`.
//
// # Safety
// `dataset` must be a live handle; `buf` must have room for `cap` bytes.
enum SieveStatus sieve_dataset_digest(const struct SieveDataset *dataset, char *buf, size_t cap);

// Scores every episode and splits them around the dataset mean.
//
// `gamma` is ignored by the average-reward criterion but must still lie in
// `[0, 1)`.
//
// # Safety
// `dataset` must be a live handle; `out` must be writable.
enum SieveStatus sieve_partition(const struct SieveDataset *dataset,
                                 uint32_t criterion,
                                 double gamma,
                                 uint32_t mode,
                                 struct SieveReport **out);

// Keeps the superior episodes of `report`. Returns
// `SIEVE_STATUS_DEGENERATE` when there are none.
//
// # Safety
// `dataset` and `report` must be live handles; `out` must be writable.
enum SieveStatus sieve_apply_filter(const struct SieveDataset *dataset,
                                    const struct SieveReport *report,
                                    struct SieveDataset **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SieveStatus sieve_report_load(const char *path, struct SieveReport **out);

// # Safety
// `report` must be a live handle; `path` a NUL-terminated string.
enum SieveStatus sieve_report_save(const struct SieveReport *report, const char *path);

// # Safety
// `report` must be NULL or a handle not yet freed.
void sieve_report_free(struct SieveReport *report);

// # Safety
// `report` must be a live handle; `out` must be writable.
enum SieveStatus sieve_report_dataset_mean(const struct SieveReport *report, double *out);

// # Safety
// `report` must be a live handle; `out` must be writable.
enum SieveStatus sieve_report_superior_count(const struct SieveReport *report, size_t *out);

// Copies the superior episode indices, ascending, into `buf`. `cap` must
// be at least `sieve_report_superior_count`.
//
// # Safety
// `report` must be a live handle; `buf` must have room for `cap` values.
enum SieveStatus sieve_report_superior_indices(const struct SieveReport *report,
                                               size_t *buf,
                                               size_t cap);

// Default settings for `algorithm`.
//
// # Safety
// `out` must be writable.
enum SieveStatus sieve_learner_config_default(uint32_t algo, struct SieveLearnerConfig *out);

// Trains a tabular learner on `dataset`.
//
// # Safety
// `dataset` must be a live handle, `config` readable, `out` writable.
enum SieveStatus sieve_train(const struct SieveDataset *dataset,
                             const struct SieveLearnerConfig *config,
                             struct SieveModel **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum SieveStatus sieve_model_load(const char *path, struct SieveModel **out);

// # Safety
// `model` must be a live handle; `path` a NUL-terminated string.
enum SieveStatus sieve_model_save(const struct SieveModel *model, const char *path);

// # Safety
// `model` must be NULL or a handle not yet freed.
void sieve_model_free(struct SieveModel *model);

// Action chosen at `state`, or -1 where the training data never visited it.
//
// # Safety
// `model` must be a live handle; `out` must be writable.
enum SieveStatus sieve_model_action(const struct SieveModel *model, size_t state, int64_t *out);

// # Safety
// `model` must be a live handle; `out` must be writable.
enum SieveStatus sieve_model_q(const struct SieveModel *model,
                               size_t state,
                               size_t action,
                               double *out);

// Mean discounted return of the model's policy over `n_episodes` rollouts
// on the environment named by `env_id`.
//
// # Safety
// `model` must be a live handle, `env_id` a NUL-terminated string, `out`
// writable.
enum SieveStatus sieve_evaluate(const struct SieveModel *model,
                                const char *env_id,
                                size_t n_episodes,
                                double gamma_eval,
                                uint64_t seed,
                                double *out);

// `tau`-expectile of `len` values.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum SieveStatus sieve_expectile(const double *values, size_t len, double tau, double *out);

// Squared MMD between `nx` and `ny` points of dimension `dim`, stored
// row-major in `x` and `y`.
//
// # Safety
// `x` must hold `nx * dim` doubles and `y` `ny * dim`; `out` must be
// writable.
enum SieveStatus sieve_mmd_squared(const double *x,
                                   size_t nx,
                                   const double *y,
                                   size_t ny,
                                   size_t dim,
                                   uint32_t kernel,
                                   double sigma,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIEVE_H */
