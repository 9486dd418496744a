/* C interface for the qaoa2 recursive QAOA MaxCut/QUBO solver. */

#pragma once

/* Generated with cbindgen:0.27.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum QaoaStatus {
  QAOA_STATUS_OK = 0,
  QAOA_STATUS_NULL_POINTER = 1,
  QAOA_STATUS_INVALID_UTF8 = 2,
  QAOA_STATUS_PARSE_ERROR = 3,
  QAOA_STATUS_INVALID_ARGUMENT = 4,
  QAOA_STATUS_SOLVE_ERROR = 5,
} QaoaStatus;

/**
 * Opaque parsed problem instance.
 */
typedef struct QaoaGraph QaoaGraph;

/**
 * Opaque solve result.
 */
typedef struct QaoaReport QaoaReport;

/**
 * Solver options mirrored as a plain C struct; get defaults from
 * `qaoa2_solve_options_default`.
 */
typedef struct QaoaSolveOptions {
  /**
   * Subgraph qubit budget (maximum nodes per partition).
   */
  uintptr_t max_nodes;
  /**
   * QAOA circuit depth.
   */
  uintptr_t p;
  /**
   * Gradient steps per subgraph angle optimization.
   */
  uintptr_t steps;
  /**
   * Angle optimization learning rate.
   */
  double lr;
  /**
   * Measurement shots per subgraph readout.
   */
  uintptr_t shots;
  uint64_t seed;
  /**
   * Nonzero: brute-force the final recursion level instead of QAOA.
   */
  bool exact_merge;
  /**
   * Nonzero: optimize angles on shot-sampled expectations.
   */
  bool shot_noise_opt;
  /**
   * Bit-phase flip probability applied to readout samples.
   */
  double readout_p;
} QaoaSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread. Never null.
 */
const char *qaoa2_last_error(void);

/**
 * Default solver options (qubit budget 10, depth 1, 20 steps, lr 0.01,
 * 1000 shots, seed 42, noiseless).
 */
struct QaoaSolveOptions qaoa2_solve_options_default(void);

/**
 * Parse a weighted edge-list instance ("N M" header plus 1-based
 * `u v w` lines). On success writes a graph handle to `out`; release it
 * with `qaoa2_graph_free`.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QaoaStatus qaoa2_graph_parse_edge_list(const char *text, struct QaoaGraph **out);

/**
 * Parse a QUBO instance ("n" header plus `i j q` triplets) and reduce it
 * to weighted MaxCut on n+1 nodes. Writes the graph handle to `out` and,
 * if `offset_out` is non-null, the constant such that
 * objective = offset - cut.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QaoaStatus qaoa2_graph_parse_qubo(const char *text,
                                       struct QaoaGraph **out,
                                       double *offset_out);

/**
 * Node count of a graph handle; 0 for null.
 */
uintptr_t qaoa2_graph_num_nodes(const struct QaoaGraph *graph);

/**
 * Release a graph handle. Null is ignored.
 */
void qaoa2_graph_free(struct QaoaGraph *graph);

/**
 * Solve an instance with one of the baseline partitioners ("random",
 * "modularity", "boundary", "kl"). On success writes a report handle to
 * `out`; release it with `qaoa2_report_free`.
 *
 * # Safety
 * All pointers must be valid; `partitioner` must be NUL-terminated.
 */
enum QaoaStatus qaoa2_solve(const struct QaoaGraph *graph,
                            const struct QaoaSolveOptions *options,
                            const char *partitioner,
                            struct QaoaReport **out);

/**
 * Cut value of a solve report; NaN for null.
 */
double qaoa2_report_cut(const struct QaoaReport *report);

/**
 * Number of spins in a solve report; 0 for null.
 */
uintptr_t qaoa2_report_num_spins(const struct QaoaReport *report);

/**
 * Copy the spin assignment (+1/-1 per node) into `buffer`, which must
 * hold exactly `qaoa2_report_num_spins` entries.
 *
 * # Safety
 * `buffer` must point to `len` writable bytes.
 */
enum QaoaStatus qaoa2_report_spins(const struct QaoaReport *report, int8_t *buffer, uintptr_t len);

/**
 * Serialize the full report to a JSON string. Returns null on failure;
 * release the string with `qaoa2_string_free`.
 */
char *qaoa2_report_to_json(const struct QaoaReport *report);

/**
 * Release a report handle. Null is ignored.
 */
void qaoa2_report_free(struct QaoaReport *report);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by `qaoa2_report_to_json`.
 */
void qaoa2_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
