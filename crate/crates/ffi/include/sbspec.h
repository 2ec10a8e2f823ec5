#ifndef SBSPEC_H
#define SBSPEC_H

#include <stddef.h>
#include <stdint.h>

typedef enum sbspec_status {
  SBSPEC_STATUS_OK = 0,
  SBSPEC_STATUS_NULL_POINTER = 1,
  SBSPEC_STATUS_INVALID_ARGUMENT = 2,
  SBSPEC_STATUS_BUFFER_TOO_SMALL = 3,
  // the request is outside the supported theory (α = 0, double eigenvalue, ...)
  SBSPEC_STATUS_REFUSED = 4,
  SBSPEC_STATUS_NOT_FOUND = 5,
  SBSPEC_STATUS_NUMERICAL = 6,
  SBSPEC_STATUS_PANIC = 7,
} sbspec_status;

// Which term of the squeezed potential a shape is attached to.
typedef enum sbspec_term {
  // αε⁻⁴Ψ(x/ε)
  SBSPEC_TERM_ALPHA = 0,
  // βε⁻³Φ(x/ε)
  SBSPEC_TERM_BETA = 1,
  // γ₁ε⁻²Υ₁(x/ε)
  SBSPEC_TERM_GAMMA1 = 2,
  // γ₂ε⁻¹Υ₂(x/ε)
  SBSPEC_TERM_GAMMA2 = 3,
} sbspec_term;

// Opaque corrector set: λ₀, λ₁, λ₂ and the profiles for one limit eigenvalue.
typedef struct sbspec_correctors sbspec_correctors;

// Opaque problem handle.
typedef struct sbspec_problem sbspec_problem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sbspec_version(void);

// Copies the last error of this thread into `buf` (NUL-terminated, truncated to
// `len`). Returns the full message length including the terminator, or 0 if the
// last call succeeded.
//
// # Safety
// `buf` must be valid for `len` bytes or null.
size_t sbspec_last_error_message(char *buf, size_t len);

// Clamped problem on (a, b) with a < 0 < b, no potential and no perturbation.
//
// # Safety
// `out` must be valid for writing a pointer.
enum sbspec_status sbspec_problem_new(double a, double b, struct sbspec_problem **out);

// # Safety
// `p` must come from [`sbspec_problem_new`] and not be used afterwards. Null is ignored.
void sbspec_problem_free(struct sbspec_problem *p);

// Sets U(x) = Σ cₖxᵏ.
//
// # Safety
// `p` must be a live handle; `coefficients` valid for `n` values.
enum sbspec_status sbspec_problem_set_potential(struct sbspec_problem *p,
                                                const double *coefficients,
                                                size_t n);

// Attaches the shape p(ξ)·b(ξ) with the given strength to one term of the
// squeezed potential; `term` is an `SbspecTerm` value. `n = 0` removes the shape.
//
// # Safety
// `p` must be a live handle; `coefficients` valid for `n` values.
enum sbspec_status sbspec_problem_set_term(struct sbspec_problem *p,
                                           int32_t term,
                                           double strength,
                                           const double *coefficients,
                                           size_t n);

// Eigenvalues of the perturbed operator at `eps` in [lo, hi], repeated by multiplicity.
//
// # Safety
// `p` must be a live handle; `out` valid for `capacity` values; `out_len` writable.
enum sbspec_status sbspec_perturbed_eigenvalues(const struct sbspec_problem *p,
                                                double eps,
                                                double lo,
                                                double hi,
                                                double *out,
                                                size_t capacity,
                                                size_t *out_len);

// Eigenvalues of the limit operator in [lo, hi], repeated by multiplicity. The
// regime (decoupled halves or interface conditions) follows from D(α).
//
// # Safety
// `p` must be a live handle; `out` valid for `capacity` values; `out_len` writable.
enum sbspec_status sbspec_limit_eigenvalues(const struct sbspec_problem *p,
                                            double lo,
                                            double hi,
                                            double *out,
                                            size_t capacity,
                                            size_t *out_len);

// Resonances of the shape p(ξ)·b(ξ) in [lo, hi], ordered by |α|, at most `max_count`.
// α = 0 is included when in the window.
//
// # Safety
// `coefficients` valid for `n` values; `out` valid for `capacity` values; `out_len` writable.
enum sbspec_status sbspec_resonant_set(const double *coefficients,
                                       size_t n,
                                       double lo,
                                       double hi,
                                       size_t max_count,
                                       double *out,
                                       size_t capacity,
                                       size_t *out_len);

// Correctors for the `target`-th (1-based) limit eigenvalue in [lo, hi].
//
// # Safety
// `p` must be a live handle; `out` valid for writing a pointer.
enum sbspec_status sbspec_correctors_new(const struct sbspec_problem *p,
                                         double lo,
                                         double hi,
                                         size_t target,
                                         struct sbspec_correctors **out);

// # Safety
// `c` must come from [`sbspec_correctors_new`] and not be used afterwards. Null is ignored.
void sbspec_correctors_free(struct sbspec_correctors *c);

// Writes λ₀, λ₁, λ₂ to `out[0..3]`.
//
// # Safety
// `c` must be a live handle; `out` valid for 3 values.
enum sbspec_status sbspec_correctors_lambdas(const struct sbspec_correctors *c, double *out);

// Quasimode at `eps`: Λ_ε = λ₀ + ελ₁ + ε²λ₂ and the outer and inner residual norms.
//
// # Safety
// `c` must be a live handle; the output pointers writable.
enum sbspec_status sbspec_correctors_quasimode(const struct sbspec_correctors *c,
                                               double eps,
                                               double *lambda_eps,
                                               double *residual_outer,
                                               double *residual_inner);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBSPEC_H */
