#ifndef JETSPRAY_H
#define JETSPRAY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Largest bundle order accepted across the boundary.
#define JETSPRAY_MAX_ORDER 6

typedef enum JetsprayStatus {
  JETSPRAY_STATUS_OK = 0,
  JETSPRAY_STATUS_NULL_POINTER = 1,
  JETSPRAY_STATUS_INVALID_UTF8 = 2,
  JETSPRAY_STATUS_CONFIG = 3,
  JETSPRAY_STATUS_INVALID_ARGUMENT = 4,
  JETSPRAY_STATUS_DOMAIN = 5,
  JETSPRAY_STATUS_TRUNCATED = 6,
  JETSPRAY_STATUS_BUFFER_TOO_SMALL = 7,
  JETSPRAY_STATUS_PANIC = 8,
} JetsprayStatus;

// An integrated geodesic of `S^(r)`.
typedef struct JetsprayGeodesic JetsprayGeodesic;

// A semispray built from a JSON config.
typedef struct JetspraySpray JetspraySpray;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap`). Returns the full message length without the NUL.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t jetspray_last_error_message(char *buf, size_t cap);

// Build a spray from a JSON config string.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum JetsprayStatus jetspray_spray_from_json(const char *json, struct JetspraySpray **out);

// # Safety
// `spray` must come from [`jetspray_spray_from_json`] and not be used
// afterwards. Null is ignored.
void jetspray_spray_free(struct JetspraySpray *spray);

// Chart dimension `n`, or 0 for a null handle.
//
// # Safety
// `spray` must be null or a live handle.
size_t jetspray_spray_dim(const struct JetspraySpray *spray);

// `G(x, y)` into `out` (`n` values).
//
// # Safety
// `x`, `y`, `out` must each hold `n` doubles.
enum JetsprayStatus jetspray_spray_eval(const struct JetspraySpray *spray,
                                        const double *x,
                                        const double *y,
                                        double *out);

// Acceleration of `S^(r)` at the state `(xi, eta)`; all three arrays hold
// `n · 2^r` doubles in block-mask order.
//
// # Safety
// Array sizes as above.
enum JetsprayStatus jetspray_lifted_rhs(const struct JetspraySpray *spray,
                                        size_t r,
                                        const double *xi,
                                        const double *eta,
                                        double *out);

// Nonlinear connection `N^i_j = ∂G^i/∂y^j` into `out` (`n × n`, row-major).
//
// # Safety
// `x`, `y` hold `n` doubles, `out` holds `n²`.
enum JetsprayStatus jetspray_connection(const struct JetspraySpray *spray,
                                        const double *x,
                                        const double *y,
                                        double *out);

// Jacobi endomorphism `Φ` into `out` (`n × n`, row-major).
//
// # Safety
// `x`, `y` hold `n` doubles, `out` holds `n²`.
enum JetsprayStatus jetspray_jacobi_endomorphism(const struct JetspraySpray *spray,
                                                 const double *x,
                                                 const double *y,
                                                 double *out);

// Integrate the geodesic of `S^(r)` from `(pos, vel)` (each `n · 2^r`
// doubles) over `[t0, t1]` with a fixed step. A trajectory that leaves the
// domain is returned truncated; see [`jetspray_geodesic_is_complete`].
//
// # Safety
// Array sizes as above; `out` must be writable.
enum JetsprayStatus jetspray_integrate_geodesic(const struct JetspraySpray *spray,
                                                size_t r,
                                                const double *pos,
                                                const double *vel,
                                                double t0,
                                                double t1,
                                                double step,
                                                struct JetsprayGeodesic **out);

// # Safety
// `geodesic` must come from [`jetspray_integrate_geodesic`] and not be
// used afterwards. Null is ignored.
void jetspray_geodesic_free(struct JetsprayGeodesic *geodesic);

// Number of samples, or 0 for a null handle.
//
// # Safety
// `geodesic` must be null or a live handle.
size_t jetspray_geodesic_len(const struct JetsprayGeodesic *geodesic);

// Doubles per position (and per velocity): `n · 2^r`.
//
// # Safety
// `geodesic` must be null or a live handle.
size_t jetspray_geodesic_width(const struct JetsprayGeodesic *geodesic);

// 1 when the whole span was integrated, 0 when truncated or null.
//
// # Safety
// `geodesic` must be null or a live handle.
int32_t jetspray_geodesic_is_complete(const struct JetsprayGeodesic *geodesic);

// Sample `i`: its time, position and velocity. Any of `t`, `pos`, `vel`
// may be null to skip it; `cap` is the size of `pos` and `vel`.
//
// # Safety
// Non-null outputs must be writable (`pos`, `vel` with `cap` doubles).
enum JetsprayStatus jetspray_geodesic_sample(const struct JetsprayGeodesic *geodesic,
                                             size_t i,
                                             double *t,
                                             double *pos,
                                             double *vel,
                                             size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETSPRAY_H */
