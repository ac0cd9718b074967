/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TTLAB_H
#define TTLAB_H

#include <stddef.h>
#include <stdint.h>

// Outcome of a call. Zero is success.
typedef enum TtlStatus {
  TTL_STATUS_OK = 0,
  TTL_STATUS_NULL_POINTER = 1,
  TTL_STATUS_INVALID_UTF8 = 2,
  TTL_STATUS_BUFFER_TOO_SMALL = 3,
  TTL_STATUS_CONFIG = 10,
  TTL_STATUS_PARSE = 11,
  TTL_STATUS_SHAPE = 12,
  TTL_STATUS_DOMAIN = 13,
  TTL_STATUS_IO = 14,
  TTL_STATUS_JSON = 15,
  TTL_STATUS_INVALID_DIFFEO = 16,
  TTL_STATUS_NUMERIC = 20,
  TTL_STATUS_TRAPPED_GEODESIC = 21,
  TTL_STATUS_SHOOTING_FAILURE = 22,
  TTL_STATUS_INCOMPLETE_TABLE = 23,
  TTL_STATUS_AMBIGUOUS_SCATTERING = 24,
  TTL_STATUS_PANIC = 99,
} TtlStatus;

// A loaded or generated dataset.
typedef struct TtlData TtlData;

// A metric model on the closed unit disc.
typedef struct TtlMetric TtlMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *ttl_version(void);

// Copies the last error message of this thread into `buf` (truncated and
// NUL-terminated when `len > 0`). Returns the length the full message
// needs including its NUL, or 0 when no error was recorded.
//
// # Safety
// `buf` is null or valid for `len` bytes.
uintptr_t ttl_last_error(char *buf, uintptr_t len);

// A zoo metric by name: `euclidean`, `curvature+0.5`, `curvature-0.5`,
// `bump` or `radial-bump`.
//
// # Safety
// `name` is a NUL-terminated string; `out` is valid for one write.
enum TtlStatus ttl_metric_preset(const char *name, struct TtlMetric **out);

// A metric from its JSON descriptor.
//
// # Safety
// `json` is a NUL-terminated string; `out` is valid for one write.
enum TtlStatus ttl_metric_from_json(const char *json, struct TtlMetric **out);

// # Safety
// `metric` is null or a handle from a `ttl_metric_*` constructor that has
// not been freed.
void ttl_metric_free(struct TtlMetric *metric);

// Riemannian distance between the points `x` and `y` (two doubles each).
//
// # Safety
// `metric` is a live handle; `x` and `y` point to two doubles; `out` is
// valid for one write.
enum TtlStatus ttl_distance(const struct TtlMetric *metric,
                            const double *x,
                            const double *y,
                            double *out);

// Exit time of the geodesic entering at boundary angle `theta` with
// tangential component `mu`.
//
// # Safety
// `metric` is a live handle; `out` is valid for one write.
enum TtlStatus ttl_exit_time(const struct TtlMetric *metric, double theta, double mu, double *out);

// Travel time data of `n_sources` points (`2 n_sources` doubles,
// interleaved `x₁, x₂`) on `m` boundary angles, shuffled by `seed`.
//
// # Safety
// `metric` is a live handle; `sources` holds `2 n_sources` doubles; `out`
// is valid for one write.
enum TtlStatus ttl_travel_time_data(const struct TtlMetric *metric,
                                    const double *sources,
                                    uintptr_t n_sources,
                                    uintptr_t m,
                                    uint64_t seed,
                                    struct TtlData **out);

// Travel time difference data derived from travel time data.
//
// # Safety
// `data` is a live handle; `out` is valid for one write.
enum TtlStatus ttl_difference_data(const struct TtlData *data, struct TtlData **out);

// Reads a dataset file of any kind.
//
// # Safety
// `path` is a NUL-terminated string; `out` is valid for one write.
enum TtlStatus ttl_data_load(const char *path, struct TtlData **out);

// Writes a dataset file, in binary when `binary` is nonzero and as text
// otherwise.
//
// # Safety
// `data` is a live handle; `path` is a NUL-terminated string.
enum TtlStatus ttl_data_save(const struct TtlData *data, const char *path, int32_t binary);

// Number of functions and of boundary angles of a travel time or
// difference dataset.
//
// # Safety
// `data` is a live handle; `functions` and `angles` are valid for one
// write each.
enum TtlStatus ttl_data_shape(const struct TtlData *data, uintptr_t *functions, uintptr_t *angles);

// Copies function `index` into `buf`, which must hold one double per
// boundary angle.
//
// # Safety
// `data` is a live handle; `buf` is valid for `len` doubles.
enum TtlStatus ttl_data_row(const struct TtlData *data,
                            uintptr_t index,
                            double *buf,
                            uintptr_t len);

// Hausdorff distance between two datasets of the same kind and grid.
//
// # Safety
// `a` and `b` are live handles; `out` is valid for one write.
enum TtlStatus ttl_hausdorff(const struct TtlData *a, const struct TtlData *b, double *out);

// # Safety
// `data` is null or a live handle that has not been freed.
void ttl_data_free(struct TtlData *data);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTLAB_H */
