#ifndef CAUSAL_CERT_H
#define CAUSAL_CERT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_POINTER = 1,
  CC_STATUS_INVALID_ARGUMENT = 2,
  CC_STATUS_IO = 3,
  CC_STATUS_PARSE = 4,
  CC_STATUS_SHAPE = 5,
  CC_STATUS_PRECONDITION = 6,
  CC_STATUS_NO_CERTIFICATE = 7,
  CC_STATUS_INTERNAL = 8,
} CcStatus;

typedef enum CcSeparability {
  CC_SEPARABILITY_FEASIBLE = 0,
  CC_SEPARABILITY_INFEASIBLE_WITH_CERTIFICATE = 1,
  CC_SEPARABILITY_UNDECIDED = 2,
} CcSeparability;

/**
 * Opaque process matrix.
 */
typedef struct CcProcess CcProcess;

typedef struct CcValidity {
  bool valid;
  double trace;
  double expected_trace;
  double min_eigenvalue;
  double hermitian_deviation;
  double subspace_residual;
} CcValidity;

/**
 * Solver settings; pass null for the defaults.
 */
typedef struct CcSolveOptions {
  double tol;
  size_t max_iter;
  double alpha;
} CcSolveOptions;

typedef struct CcInterval {
  double lo;
  double hi;
  /**
   * Normalized margin of the infeasibility certificate at `lo`.
   */
  double lo_certificate_margin;
  /**
   * Constraint residual of the feasible decomposition at `hi`.
   */
  double hi_residual;
  /**
   * Set when a bound had to be moved to bracket the threshold.
   */
  bool widened;
  size_t probes;
} CcInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cc_last_error_message(void);

/**
 * The quantum switch mixed with white-noise weight `r >= 0`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CcStatus cc_process_switch(double r, struct CcProcess **out);

/**
 * Loads a process manifest (JSON with a matrix file next to it).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CcStatus cc_process_load(const char *path, struct CcProcess **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `p` must come from this library and not be used afterwards.
 */
void cc_process_free(struct CcProcess *p);

/**
 * Number of parties and total matrix dimension.
 *
 * # Safety
 * `p` must be a live handle; `parties` and `dim` writable.
 */
enum CcStatus cc_process_shape(const struct CcProcess *p, size_t *parties, size_t *dim);

/**
 * Validity report of a process matrix.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum CcStatus cc_process_validate(const struct CcProcess *p, struct CcValidity *out);

/**
 * Brackets the switch-family noise threshold by bisection on `[lo, hi]`.
 *
 * # Safety
 * `opts` may be null; `out` must be writable.
 */
enum CcStatus cc_switch_threshold(double lo,
                                  double hi,
                                  double tol,
                                  const struct CcSolveOptions *opts,
                                  struct CcInterval *out);

/**
 * Separability verdict for the switch family at noise `r` under the
 * four-party definition with a quantum input for the first party.
 * `evidence` receives the certificate margin or the primal residual.
 *
 * # Safety
 * `opts` may be null; `verdict` and `evidence` must be writable.
 */
enum CcStatus cc_check_sep_switch(double r,
                                  const struct CcSolveOptions *opts,
                                  enum CcSeparability *verdict,
                                  double *evidence);

/**
 * Extended CHSH value of the reference realization and the local bound.
 *
 * # Safety
 * `value` must be writable; `local_bound` may be null.
 */
enum CcStatus cc_extended_chsh_reference(double *value, double *local_bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUSAL_CERT_H */
