#ifndef ENTROSCOPE_H
#define ENTROSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ENTROSCOPE_OK 0

#define ENTROSCOPE_INVALID_ARGUMENT 1

#define ENTROSCOPE_OUT_OF_RANGE 2

#define ENTROSCOPE_NULL_POINTER 3

/**
 * The computation did not reach the requested accuracy.
 */
#define ENTROSCOPE_NOT_RESOLVED 4

#define ENTROSCOPE_NOT_APPLICABLE 5

/**
 * The orbit met the turning point or left the invariant interval.
 */
#define ENTROSCOPE_DEGENERATE_ORBIT 6

#define ENTROSCOPE_BUDGET_EXCEEDED 7

#define ENTROSCOPE_IO 8

#define ENTROSCOPE_PANIC 9

#define ENTROSCOPE_BUFFER_TOO_SMALL 10

/**
 * Opaque band-merging cascade table.
 */
typedef struct EntroscopeCascade EntroscopeCascade;

/**
 * Opaque precision configuration.
 */
typedef struct EntroscopeContext EntroscopeContext;

typedef struct EntroscopeEntropy {
  double value;
  /**
   * Low word; nonzero only for extended-precision contexts.
   */
  double value_lo;
  double error_radius;
  uint32_t renorm_depth;
  bool superattracting;
  bool no_root;
} EntroscopeEntropy;

typedef struct EntroscopeLyapunov {
  double lower;
  double upper;
  double last;
  bool converged;
  size_t steps;
} EntroscopeLyapunov;

typedef struct EntroscopeWindow {
  size_t period;
  double left;
  double right;
  double center;
  size_t feig_depth;
} EntroscopeWindow;

typedef struct EntroscopeAccumulation {
  double value;
  double uncertainty;
  double delta_star;
} EntroscopeAccumulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *entroscope_last_error(void);

/**
 * New context; `bits` = 53 selects native doubles, 128..=1024 the extended
 * backend. Returns null on invalid precision.
 */
struct EntroscopeContext *entroscope_context_new(uint32_t bits);

/**
 * # Safety
 * `ctx` must be null or a live handle from [`entroscope_context_new`].
 */
int32_t entroscope_context_set_depth(struct EntroscopeContext *ctx, size_t depth);

/**
 * # Safety
 * `ctx` must be null or a handle from [`entroscope_context_new`] not yet freed.
 */
void entroscope_context_free(struct EntroscopeContext *ctx);

/**
 * Entropy of `x² + a`.
 *
 * # Safety
 * `ctx` must be a live context handle and `out` a writable pointer.
 */
int32_t entroscope_quad_entropy(const struct EntroscopeContext *ctx,
                                double a,
                                struct EntroscopeEntropy *out);

/**
 * Entropy of `1 − b|x|`, `log b` for `b` in `[1, 2]`.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
int32_t entroscope_tent_entropy(double b, struct EntroscopeEntropy *out);

/**
 * Finite-time Lyapunov exponent of the critical value over `n` steps.
 *
 * # Safety
 * `ctx` must be a live context handle and `out` a writable pointer.
 */
int32_t entroscope_lyapunov(const struct EntroscopeContext *ctx,
                            double a,
                            size_t n,
                            struct EntroscopeLyapunov *out);

/**
 * Kneading sequence of `x² + a` as a NUL-terminated string over `L`, `C`,
 * `R`. `*written` receives the length without the terminator; when the
 * buffer is too small it receives the required length and
 * `ENTROSCOPE_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * `ctx` must be a live handle, `buf` writable for `len` bytes (or null with
 * `len` 0) and `written` a writable pointer.
 */
int32_t entroscope_kneading(const struct EntroscopeContext *ctx,
                            double a,
                            size_t n,
                            char *buf,
                            size_t len,
                            size_t *written);

/**
 * Renormalisation window containing `a`. `*found` is false when none of
 * period up to `max_period` contains it.
 *
 * # Safety
 * `out` and `found` must be writable pointers.
 */
int32_t entroscope_detect_window(double a,
                                 size_t max_period,
                                 struct EntroscopeWindow *out,
                                 bool *found);

/**
 * Band-merging cascade with rows `0..=depth`.
 *
 * # Safety
 * `ctx` must be a live handle and `out` a writable pointer; on success
 * `*out` must later be released with [`entroscope_cascade_free`].
 */
int32_t entroscope_cascade_new(const struct EntroscopeContext *ctx,
                               size_t depth,
                               struct EntroscopeCascade **out);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `table` must be null or a live cascade handle.
 */
size_t entroscope_cascade_rows(const struct EntroscopeCascade *table);

/**
 * Row `m` as a two-word value `hi + lo`.
 *
 * # Safety
 * `table` must be a live cascade handle; `hi` and `lo` writable pointers.
 */
int32_t entroscope_cascade_row(const struct EntroscopeCascade *table,
                               size_t m,
                               double *hi,
                               double *lo);

/**
 * Accumulation point of the cascade and the ratio limit.
 *
 * # Safety
 * `table` must be a live cascade handle and `out` a writable pointer.
 */
int32_t entroscope_cascade_accumulation(const struct EntroscopeCascade *table,
                                        struct EntroscopeAccumulation *out);

/**
 * # Safety
 * `table` must be null or a handle from [`entroscope_cascade_new`] not yet
 * freed.
 */
void entroscope_cascade_free(struct EntroscopeCascade *table);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTROSCOPE_H */
