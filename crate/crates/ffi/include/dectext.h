#ifndef DECTEXT_H
#define DECTEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DtStatus {
  DT_STATUS_OK = 0,
  DT_STATUS_NULL_POINTER = 1,
  DT_STATUS_INVALID_ARGUMENT = 2,
  DT_STATUS_IO = 3,
  DT_STATUS_FORMAT = 4,
  DT_STATUS_NUMERIC = 5,
  DT_STATUS_PANIC = 6,
} DtStatus;

// An embedding matrix with its document ids.
typedef struct DtEmbeddings DtEmbeddings;

// The outcome of one training run.
typedef struct DtRunResult DtRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next `dt_*` call on the same thread.
const char *dt_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *dt_version(void);

// Reads an `EMB1` file.
enum DtStatus dt_embeddings_load(const char *path, struct DtEmbeddings **out);

// Copies `n·d` row-major values; ids become `0..n`.
enum DtStatus dt_embeddings_from_rows(const float *data,
                                      size_t n,
                                      size_t d,
                                      struct DtEmbeddings **out);

// Number of rows, or 0 for a null handle.
size_t dt_embeddings_n(const struct DtEmbeddings *e);

// Row width, or 0 for a null handle.
size_t dt_embeddings_d(const struct DtEmbeddings *e);

void dt_embeddings_free(struct DtEmbeddings *e);

// Clustering accuracy and NMI of `n` predicted labels against the truth.
enum DtStatus dt_evaluate(const size_t *pred,
                          const size_t *truth,
                          size_t n,
                          double *acc_out,
                          double *nmi_out);

// Seeded K-means. Writes `n` labels and, when `centroids_out` is not null,
// `k·d` centroid values.
enum DtStatus dt_kmeans(const struct DtEmbeddings *e,
                        size_t k,
                        size_t max_iter,
                        uint64_t seed,
                        size_t *labels_out,
                        double *centroids_out);

// Student-t soft assignment of `n` rows of width `d` to `k` centroids.
// Writes `n·k` probabilities, row-major.
enum DtStatus dt_soft_assign(const double *embeddings,
                             size_t n,
                             size_t d,
                             const double *centroids,
                             size_t k,
                             double alpha,
                             double *q_out);

// Trains from a TOML config (same keys as the command-line tool). Relative
// data paths resolve against the working directory.
enum DtStatus dt_train_toml(const char *config_toml, struct DtRunResult **out);

// Final accuracy and NMI. Fails with `InvalidArgument` when the run had no labels.
enum DtStatus dt_run_result_metrics(const struct DtRunResult *r, double *acc_out, double *nmi_out);

// Number of labelled inputs, or 0 for a null handle.
size_t dt_run_result_len(const struct DtRunResult *r);

// Number of epochs recorded, or 0 for a null handle.
size_t dt_run_result_epochs(const struct DtRunResult *r);

// Copies the final labels; `capacity` must be at least `dt_run_result_len`.
enum DtStatus dt_run_result_labels(const struct DtRunResult *r,
                                   size_t *labels_out,
                                   size_t capacity);

// The run as JSON with sorted keys. Free the string with `dt_string_free`.
enum DtStatus dt_run_result_json(const struct DtRunResult *r, char **out);

void dt_run_result_free(struct DtRunResult *r);

void dt_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DECTEXT_H */
