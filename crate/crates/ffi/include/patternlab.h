#ifndef PATTERNLAB_H
#define PATTERNLAB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  PL_STATUS_OUT_OF_RANGE = 3,
  PL_STATUS_SIZE_GUARD = 4,
  PL_STATUS_BUFFER_TOO_SMALL = 5,
  PL_STATUS_INTERNAL = 6,
} PlStatus;

/**
 * Opaque graph handle.
 */
typedef struct PlGraph PlGraph;

/**
 * Opaque depth-d pattern histogram handle.
 */
typedef struct PlHistogram PlHistogram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the calling thread's last error message, or null if the last call
 * succeeded. Release with [`pl_string_free`].
 */
char *pl_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void pl_string_free(char *s);

/**
 * Builds a graph from `num_edges` `(u, v)` pairs laid out flat in `edges`.
 * `features` may be null (every node gets class 0); otherwise it holds `n`
 * classes below `num_classes`.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum PlStatus pl_graph_new(size_t n,
                           const size_t *edges,
                           size_t num_edges,
                           const size_t *features,
                           size_t num_classes,
                           struct PlGraph **out);

/**
 * G(n, p) from the `(seed, stream)` random stream.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_graph_gen_er(size_t n,
                              double p,
                              uint64_t seed,
                              uint64_t stream,
                              struct PlGraph **out);

/**
 * Preferential attachment with `m` edges per new node.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_graph_gen_pa(size_t n,
                              size_t m,
                              uint64_t seed,
                              uint64_t stream,
                              struct PlGraph **out);

/**
 * Random geometric graph in the unit square with radius `rho`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PlStatus pl_graph_gen_geometric(size_t n,
                                     double rho,
                                     uint64_t seed,
                                     uint64_t stream,
                                     struct PlGraph **out);

/**
 * Node count; 0 for a null handle.
 *
 * # Safety
 * `g` must be a live handle or null.
 */
size_t pl_graph_num_nodes(const struct PlGraph *g);

/**
 * Undirected edge count; 0 for a null handle.
 *
 * # Safety
 * `g` must be a live handle or null.
 */
size_t pl_graph_num_edges(const struct PlGraph *g);

/**
 * # Safety
 * `g` must be a live handle; `out` a valid pointer.
 */
enum PlStatus pl_graph_degree(const struct PlGraph *g, size_t v, size_t *out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards; null is a no-op.
 */
void pl_graph_free(struct PlGraph *g);

/**
 * Writes each node's depth-`d` pattern digest as 128 bits split into `hi`
 * and `lo` words. Both buffers must hold `len >= num_nodes` entries.
 *
 * # Safety
 * `g` must be a live handle; `hi` and `lo` valid for `len` writes.
 */
enum PlStatus pl_refine_digests(const struct PlGraph *g,
                                size_t d,
                                uint64_t *hi,
                                uint64_t *lo,
                                size_t len);

/**
 * Number of entries [`pl_tree_descriptor`] writes: `(d + 1) * num_classes`.
 *
 * # Safety
 * `g` must be a live handle or null.
 */
size_t pl_tree_descriptor_len(const struct PlGraph *g, size_t d);

/**
 * Per-layer, per-class node counts of node `v`'s depth-`d` pattern tree,
 * layer-major.
 *
 * # Safety
 * `g` must be a live handle; `out` valid for `len` writes.
 */
enum PlStatus pl_tree_descriptor(const struct PlGraph *g,
                                 size_t v,
                                 size_t d,
                                 uint64_t *out,
                                 size_t len);

/**
 * Exact maximum clique size; graphs above 60 nodes are refused.
 *
 * # Safety
 * `g` must be a live handle; `out` a valid pointer.
 */
enum PlStatus pl_max_clique(const struct PlGraph *g, size_t *out);

/**
 * Depth-`d` pattern histogram over `count` graphs.
 *
 * # Safety
 * `graphs` must hold `count` live handles; `out` a valid pointer.
 */
enum PlStatus pl_histogram_new(const struct PlGraph *const *graphs,
                               size_t count,
                               size_t d,
                               struct PlHistogram **out);

/**
 * Number of distinct patterns; 0 for a null handle.
 *
 * # Safety
 * `h` must be a live handle or null.
 */
size_t pl_histogram_support_size(const struct PlHistogram *h);

/**
 * # Safety
 * `h` must come from this library and not be used afterwards; null is a no-op.
 */
void pl_histogram_free(struct PlHistogram *h);

/**
 * Total variation distance between two histograms of equal depth.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` a valid pointer.
 */
enum PlStatus pl_tv_distance(const struct PlHistogram *a, const struct PlHistogram *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATTERNLAB_H */
