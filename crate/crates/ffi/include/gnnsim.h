#ifndef GNNSIM_H
#define GNNSIM_H

/* Generated by cbindgen from gnnsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes returned by every fallible entry point.
typedef enum GnnsimStatus {
  GNNSIM_STATUS_OK = 0,
  GNNSIM_STATUS_INVALID_ARGUMENT = 1,
  GNNSIM_STATUS_IO = 2,
  GNNSIM_STATUS_CONFIG = 3,
  GNNSIM_STATUS_GRAPH = 4,
  GNNSIM_STATUS_SIMULATION = 5,
  GNNSIM_STATUS_INTERNAL = 6,
} GnnsimStatus;

// Opaque graph handle.
typedef struct GnnsimGraph GnnsimGraph;

// Opaque run-report handle; one summary row per executed scheduler policy.
typedef struct GnnsimReport GnnsimReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message for this thread into `buf` (NUL
// terminated, truncating). Returns the full message length in bytes,
// excluding the terminator. `buf` may be NULL to query the length.
//
// # Safety
// `buf` must point to at least `len` writable bytes when non-NULL.
size_t gnnsim_last_error_message(char *buf, size_t len);

// Loads a whitespace-separated edge list (`src dst [weight]` per line,
// `#` comments) into a CSR graph.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum GnnsimStatus gnnsim_graph_load(const char *path,
                                    size_t num_nodes,
                                    bool undirected,
                                    struct GnnsimGraph **out);

// Generates a power-law workload graph (degrees in `[1, max_degree]`,
// exponent `gamma`), deterministic for a given seed.
//
// # Safety
// `out` must be a valid pointer.
enum GnnsimStatus gnnsim_graph_generate_power_law(size_t num_nodes,
                                                  double gamma,
                                                  size_t max_degree,
                                                  uint64_t seed,
                                                  struct GnnsimGraph **out);

// # Safety
// `graph` must be a live handle from this library (or NULL, returning 0).
size_t gnnsim_graph_num_nodes(const struct GnnsimGraph *graph);

// # Safety
// `graph` must be a live handle from this library (or NULL, returning 0).
size_t gnnsim_graph_num_edges(const struct GnnsimGraph *graph);

// # Safety
// `graph` must be a live handle from this library (or NULL, returning 0).
double gnnsim_graph_mean_degree(const struct GnnsimGraph *graph);

// # Safety
// `graph` must be NULL or a handle not yet freed; it is invalid afterwards.
void gnnsim_graph_free(struct GnnsimGraph *graph);

// Parses an experiment config file, runs it, and returns the summaries.
// When `out_dir` is non-NULL the usual report files (summary.csv,
// per_node.csv, config.resolved) are written there.
//
// # Safety
// `config_path` must be NUL-terminated; `out_dir` may be NULL; `out` must
// be a valid pointer.
enum GnnsimStatus gnnsim_run_config_file(const char *config_path,
                                         const char *out_dir,
                                         struct GnnsimReport **out);

// # Safety
// `report` must be a live handle from this library (or NULL, returning 0).
size_t gnnsim_report_num_runs(const struct GnnsimReport *report);

// # Safety
// `report` must be a live handle; out-of-range `run` returns 0.
uint64_t gnnsim_report_total_cycles(const struct GnnsimReport *report, size_t run);

// # Safety
// `report` must be a live handle; out-of-range `run` returns 0.
double gnnsim_report_latency_ms(const struct GnnsimReport *report, size_t run);

// # Safety
// `report` must be a live handle; out-of-range `run` returns 0.
double gnnsim_report_nodes_per_ms(const struct GnnsimReport *report, size_t run);

// Copies the functional output hash of run `run` into `buf` (NUL
// terminated, truncating). Returns the hash length in bytes.
//
// # Safety
// `buf` must point to at least `len` writable bytes when non-NULL.
size_t gnnsim_report_output_hash(const struct GnnsimReport *report,
                                 size_t run,
                                 char *buf,
                                 size_t len);

// # Safety
// `report` must be NULL or a handle not yet freed; it is invalid afterwards.
void gnnsim_report_free(struct GnnsimReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNNSIM_H */
