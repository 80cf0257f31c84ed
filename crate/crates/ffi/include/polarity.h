#ifndef POLARITY_H
#define POLARITY_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/* Handles are released with the matching *_free function. */

typedef enum PolarityStatus {
  POLARITY_STATUS_OK = 0,
  POLARITY_STATUS_NULL_POINTER = 1,
  POLARITY_STATUS_INVALID_INPUT = 2,
  POLARITY_STATUS_DIMENSION_MISMATCH = 3,
  POLARITY_STATUS_SINGULAR = 4,
  POLARITY_STATUS_NUMERICAL_FAILURE = 5,
  POLARITY_STATUS_BUFFER_TOO_SMALL = 6,
  POLARITY_STATUS_PANIC = 7,
} PolarityStatus;

// Which factorization of a cost matrix through the Legendre polarity.
typedef enum PolarityFactor {
  // `C = C_L M_T^{-1}`.
  POLARITY_FACTOR_T = 0,
  // `C = M_S^T C_L`.
  POLARITY_FACTOR_S = 1,
} PolarityFactor;

// Normalization of the total divergences.
typedef enum PolarityVariant {
  // Divide by `sqrt(1 + |g|^2)`.
  POLARITY_VARIANT_SQRT = 0,
  // Divide by `1 + |g|^2`.
  POLARITY_VARIANT_PAPER = 1,
} PolarityVariant;

typedef struct PolarityCostMatrix PolarityCostMatrix;

typedef struct PolarityEnvelope PolarityEnvelope;

typedef struct PolarityFunction PolarityFunction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *polarity_version(void);

// Length in bytes of the last error message on this thread, without the
// terminating NUL. Zero after a successful call.
size_t polarity_last_error_length(void);

// Copies the last error message into `buf` (NUL-terminated). Returns
// `BufferTooSmall` when `len` is not larger than the message length.
//
// # Safety
// `buf` must be valid for `len` bytes.
enum PolarityStatus polarity_last_error_message(char *buf, size_t len);

// Cost matrix of size `(n+2) x (n+2)` from `len = (n+2)^2` row-major entries.
//
// # Safety
// `data` must be valid for `len` reads and `out` for one write.
enum PolarityStatus polarity_cost_matrix_new(size_t n,
                                             const double *data,
                                             size_t len,
                                             struct PolarityCostMatrix **out);

// The Legendre polarity matrix `[[-I,0,0],[0,0,1],[0,1,0]]`.
//
// # Safety
// `out` must be valid for one write.
enum PolarityStatus polarity_cost_matrix_legendre(size_t n, struct PolarityCostMatrix **out);

// The matrix mapping the epigraph of the half squared norm onto the unit ball.
//
// # Safety
// `out` must be valid for one write.
enum PolarityStatus polarity_cost_matrix_parabola_to_sphere(size_t n,
                                                            struct PolarityCostMatrix **out);

// Parameter dimension `n`; the matrix is `(n+2) x (n+2)`. Zero for null.
//
// # Safety
// `c` must be null or a live handle.
size_t polarity_cost_matrix_n(const struct PolarityCostMatrix *c);

// # Safety
// `c` must be null or a handle not yet freed.
void polarity_cost_matrix_free(struct PolarityCostMatrix *c);

// `a^T C b` for homogeneous points of length `len = n+2`.
//
// # Safety
// `a` and `b` must be valid for `len` reads, `out` for one write.
enum PolarityStatus polarity_pairing(const struct PolarityCostMatrix *c,
                                     const double *a,
                                     const double *b,
                                     size_t len,
                                     double *out);

// Writes the `(n+2)^2` row-major entries of `M_T` or `M_S`.
//
// # Safety
// `out` must be valid for `out_len` writes.
enum PolarityStatus polarity_decompose(const struct PolarityCostMatrix *c,
                                       enum PolarityFactor factor,
                                       double *out,
                                       size_t out_len);

// One-dimensional sampled function on strictly increasing `theta`.
// `gradients` may be null; values may be `+inf`.
//
// # Safety
// `theta`, `values` and (when non-null) `gradients` must be valid for `len`
// reads; `out` for one write.
enum PolarityStatus polarity_function_new_1d(const double *theta,
                                             const double *values,
                                             const double *gradients,
                                             size_t len,
                                             struct PolarityFunction **out);

// # Safety
// `f` must be null or a handle not yet freed.
void polarity_function_free(struct PolarityFunction *f);

// Legendre-Fenchel conjugate of a one-dimensional sampled function at `len`
// dual points (strictly increasing). `fast` selects the linear-time hull walk.
//
// # Safety
// `eta` must be valid for `len` reads and `out` for `len` writes.
enum PolarityStatus polarity_conjugate_1d(const struct PolarityFunction *f,
                                          const double *eta,
                                          size_t len,
                                          bool fast,
                                          double *out);

// c-transform `min_i c(theta_i, eta_j) + F(theta_i)` of a one-dimensional
// function under `c = Cn theta^2 + d eta^2 + e theta eta + f theta + g eta + h`.
//
// # Safety
// `eta` must be valid for `len` reads and `out` for `len` writes.
enum PolarityStatus polarity_c_transform_1d(const struct PolarityFunction *f,
                                            double cn,
                                            double d,
                                            double e,
                                            double f_coef,
                                            double g_coef,
                                            double h,
                                            const double *eta,
                                            size_t len,
                                            double *out);

// Boundary of the polar of the epigraph of `f` under `c`, one point per
// finite sample.
//
// # Safety
// `out` must be valid for one write.
enum PolarityStatus polarity_envelope_new(const struct PolarityCostMatrix *c,
                                          const struct PolarityFunction *f,
                                          struct PolarityEnvelope **out);

// Number of envelope points. Zero for null.
//
// # Safety
// `env` must be null or a live handle.
size_t polarity_envelope_len(const struct PolarityEnvelope *env);

// Writes the `n+2` homogeneous coordinates of point `i` and whether it lies
// at infinity. Finite points have last coordinate 1; points at infinity are
// unit vectors.
//
// # Safety
// `coords` must be valid for `coords_len` writes; `ideal` may be null.
enum PolarityStatus polarity_envelope_point(const struct PolarityEnvelope *env,
                                            size_t i,
                                            double *coords,
                                            size_t coords_len,
                                            bool *ideal);

// # Safety
// `env` must be null or a handle not yet freed.
void polarity_envelope_free(struct PolarityEnvelope *env);

// Polar Fenchel-Young divergence `[a]^T C_L [b]` of two homogeneous points
// of length `len`, each normalized to last coordinate 1.
//
// # Safety
// `a` and `b` must be valid for `len` reads, `out` for one write.
enum PolarityStatus polarity_polar_fenchel_young(const double *a,
                                                 const double *b,
                                                 size_t len,
                                                 double *out);

// Polar total Fenchel-Young divergence, conformal factor taken at `b`.
//
// # Safety
// `a` and `b` must be valid for `len` reads, `out` for one write.
enum PolarityStatus polarity_polar_total_fenchel_young(const double *a,
                                                       const double *b,
                                                       size_t len,
                                                       enum PolarityVariant variant,
                                                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLARITY_H */
