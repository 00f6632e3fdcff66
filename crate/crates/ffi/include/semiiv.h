#ifndef SEMIIV_H
#define SEMIIV_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SivCombine {
  SIV_COMBINE_JOINT = 0,
  SIV_COMBINE_MARGINAL = 1,
} SivCombine;

typedef enum SivEngine {
  SIV_ENGINE_DIRECT_LS = 0,
  SIV_ENGINE_BACKFIT = 1,
} SivEngine;

typedef enum SivKernel {
  SIV_KERNEL_TRICUBE = 0,
  SIV_KERNEL_EPANECHNIKOV = 1,
  SIV_KERNEL_UNIFORM = 2,
} SivKernel;

typedef enum SivModel {
  SIV_MODEL_SINGLE_INSTRUMENT = 0,
  SIV_MODEL_DOUBLE_INSTRUMENT = 1,
} SivModel;

typedef enum SivStatus {
  SIV_STATUS_OK = 0,
  SIV_STATUS_NULL_POINTER = 1,
  SIV_STATUS_INVALID_ARGUMENT = 2,
  SIV_STATUS_INVALID_INPUT = 3,
  SIV_STATUS_SINGULAR_FIT = 4,
  SIV_STATUS_INTERPOLATION = 5,
  SIV_STATUS_OUT_OF_RANGE = 6,
  SIV_STATUS_MISSING_COLUMN = 7,
  SIV_STATUS_CSV = 8,
  SIV_STATUS_SPEC = 9,
  SIV_STATUS_IO = 10,
  SIV_STATUS_PANIC = 11,
} SivStatus;

typedef struct SivDataset SivDataset;

typedef struct SivReport SivReport;

/**
 * Test settings. Start from [`siv_config_default`].
 */
typedef struct SivConfig {
  uint32_t degree;
  double span;
  enum SivKernel kernel;
  enum SivEngine engine;
  uint32_t basis_size;
  double tol;
  uint32_t max_iter;
  enum SivCombine combine;
  /**
   * Bootstrap replicates for the measurability stage; 0 disables it.
   */
  uint32_t bootstrap_replicates;
  uint64_t seed;
  double alpha;
} SivConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

struct SivConfig siv_config_default(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *siv_last_error_message(void);

struct SivDataset *siv_dataset_new(void);

/**
 * # Safety
 * `ds` must be a live dataset handle, `name` a NUL-terminated string and
 * `values` must point to `len` readable doubles (it may be NULL when `len`
 * is 0).
 */
enum SivStatus siv_dataset_add_column(struct SivDataset *ds,
                                      const char *name,
                                      const double *values,
                                      size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum SivStatus siv_dataset_from_csv(const char *path, struct SivDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle or NULL.
 */
size_t siv_dataset_n_rows(const struct SivDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void siv_dataset_free(struct SivDataset *ds);

/**
 * Generates a simulated sample. `with_truth` also stores the hidden
 * columns.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum SivStatus siv_simulate(enum SivModel model,
                            double c,
                            size_t n,
                            uint64_t seed,
                            bool with_truth,
                            struct SivDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset, the names NUL-terminated strings, `cfg`
 * NULL (defaults) or readable, and `out` writable.
 */
enum SivStatus siv_semi_instrument_test(const struct SivDataset *ds,
                                        const char *instrument,
                                        const char *treatment,
                                        const char *outcome,
                                        const struct SivConfig *cfg,
                                        struct SivReport **out);

/**
 * # Safety
 * As for [`siv_semi_instrument_test`].
 */
enum SivStatus siv_linear_double_test(const struct SivDataset *ds,
                                      const char *z1,
                                      const char *z2,
                                      const char *treatment,
                                      const char *outcome,
                                      const struct SivConfig *cfg,
                                      struct SivReport **out);

/**
 * # Safety
 * As for [`siv_semi_instrument_test`].
 */
enum SivStatus siv_double_test(const struct SivDataset *ds,
                               const char *z1,
                               const char *z2,
                               const char *treatment,
                               const char *outcome,
                               const struct SivConfig *cfg,
                               struct SivReport **out);

/**
 * Writes 1 to `accepted` when the null was accepted, 0 otherwise.
 *
 * # Safety
 * `report` must be a live report handle and `accepted` writable.
 */
enum SivStatus siv_report_decision(const struct SivReport *report, bool *accepted);

/**
 * Pretty JSON for the report, or NULL on failure. Free with
 * [`siv_string_free`].
 *
 * # Safety
 * `report` must be a live report handle or NULL.
 */
char *siv_report_to_json(const struct SivReport *report);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void siv_report_free(struct SivReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void siv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMIIV_H */
