#ifndef DYNMEANS_H
#define DYNMEANS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  /**
   * lambda, Q, tau, N_Q, k_tau, restarts or max_iters out of range
   */
  DM_STATUS_INVALID_PARAM = 2,
  /**
   * wrong dimension or non-finite coordinate
   */
  DM_STATUS_INVALID_INPUT = 3,
  /**
   * caller buffer shorter than required
   */
  DM_STATUS_BUFFER_TOO_SMALL = 4,
  /**
   * no timestep has been clustered yet
   */
  DM_STATUS_NO_RESULT = 5,
  DM_STATUS_PANIC = 6,
} DmStatus;

/**
 * Opaque clusterer state.
 */
typedef struct DmClusterer DmClusterer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *dm_last_error(void);

/**
 * Convert `(N_Q, k_tau)` into `(Q, tau)` for the given lambda.
 *
 * # Safety
 * `q_out` and `tau_out` must be valid for writes.
 */
enum DmStatus dm_reparameterize(double lambda,
                                double n_q,
                                double k_tau,
                                double *q_out,
                                double *tau_out);

/**
 * New clusterer from lambda, Q and tau.
 *
 * # Safety
 * `out` must be valid for writes. On success `*out` owns a handle that must
 * be passed to [`dm_clusterer_free`].
 */
enum DmStatus dm_clusterer_new(double lambda,
                               double q,
                               double tau,
                               size_t restarts,
                               size_t max_iters,
                               uint64_t seed,
                               struct DmClusterer **out);

/**
 * New clusterer from lambda, N_Q and k_tau.
 *
 * # Safety
 * Same as [`dm_clusterer_new`].
 */
enum DmStatus dm_clusterer_new_reparam(double lambda,
                                       double n_q,
                                       double k_tau,
                                       size_t restarts,
                                       size_t max_iters,
                                       uint64_t seed,
                                       struct DmClusterer **out);

/**
 * Release a clusterer. NULL is ignored.
 *
 * # Safety
 * `handle` must come from `dm_clusterer_new*` and not be used afterwards.
 */
void dm_clusterer_free(struct DmClusterer *handle);

/**
 * Cluster the next batch. `labels_out` receives one persistent cluster id
 * per point and may be NULL when `n` is 0.
 *
 * # Safety
 * `points` must hold `n * dim` doubles and `labels_out` room for `n` ids.
 */
enum DmStatus dm_clusterer_step(struct DmClusterer *handle,
                                const double *points,
                                size_t n,
                                size_t dim,
                                uint64_t *labels_out);

/**
 * Number of batches clustered so far.
 *
 * # Safety
 * `handle` must be a live handle or NULL (returns 0).
 */
size_t dm_clusterer_timestep(const struct DmClusterer *handle);

/**
 * Cost, iteration count and convergence flag of the last step.
 *
 * # Safety
 * Output pointers must be valid for writes; any of them may be NULL.
 */
enum DmStatus dm_clusterer_last_cost(const struct DmClusterer *handle,
                                     double *cost,
                                     size_t *iterations,
                                     bool *converged);

/**
 * Active clusters of the last step. Writes the count to `count`; when
 * `capacity` is at least that count also fills `ids` (count entries),
 * `centers` (count * dim, row-major) and `weights` (count). Array
 * pointers may be NULL to skip them. Call with capacity 0 to query the size.
 *
 * # Safety
 * Non-NULL arrays must have room for `capacity` clusters.
 */
enum DmStatus dm_clusterer_clusters(const struct DmClusterer *handle,
                                    uint64_t *ids,
                                    double *centers,
                                    double *weights,
                                    size_t capacity,
                                    size_t *count);

/**
 * One-shot DP-Means. `labels_out` gets a cluster index per point,
 * `n_clusters` the number of clusters and `cost` the final objective.
 * The scan order is shuffled from `seed`.
 *
 * # Safety
 * `points` must hold `n * dim` doubles and `labels_out` room for `n`
 * entries. Scalar outputs may be NULL.
 */
enum DmStatus dm_dp_means(const double *points,
                          size_t n,
                          size_t dim,
                          double lambda,
                          size_t max_iters,
                          uint64_t seed,
                          size_t *labels_out,
                          size_t *n_clusters,
                          double *cost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNMEANS_H */
