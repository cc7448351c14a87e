#ifndef PMHE_H
#define PMHE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum PmheStatus {
  PMHE_STATUS_OK = 0,
  PMHE_STATUS_NULL_POINTER = 1,
  PMHE_STATUS_INVALID_ARGUMENT = 2,
  PMHE_STATUS_LEVEL_EXHAUSTED = 3,
  PMHE_STATUS_MISSING_PARTIES = 4,
  PMHE_STATUS_KEY_MISMATCH = 5,
  PMHE_STATUS_CONFIG = 6,
  PMHE_STATUS_IO = 7,
  PMHE_STATUS_PROTOCOL = 8,
  PMHE_STATUS_PANIC = 9,
  PMHE_STATUS_BUFFER_TOO_SMALL = 10,
} PmheStatus;

// Opaque context handle.
typedef struct PmheContext PmheContext;

// Opaque encrypted h x h matrix.
typedef struct PmheMatrix PmheMatrix;

// Operation tallies of a context.
typedef struct PmheOpCounter {
  uint64_t adds;
  uint64_t subs;
  uint64_t mul_pt;
  uint64_t mul_ct;
  uint64_t rotations;
  uint64_t rescales;
  uint64_t bootstraps;
  uint64_t keyswitches;
} PmheOpCounter;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call on the same thread.
const char *pmhe_last_error(void);

// Create a context with `parties` key shares.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum PmheStatus pmhe_context_new(size_t ring_dim,
                                 uint32_t initial_level,
                                 uint16_t parties,
                                 uint64_t seed,
                                 struct PmheContext **out);

// # Safety
// `ctx` must come from [`pmhe_context_new`] and not be used afterwards.
void pmhe_context_free(struct PmheContext *ctx);

// Slot count of the context, 0 for NULL.
//
// # Safety
// `ctx` must be NULL or a live context.
size_t pmhe_context_slots(const struct PmheContext *ctx);

// # Safety
// `ctx` must be a live context and `out` writable.
enum PmheStatus pmhe_context_meter(const struct PmheContext *ctx, struct PmheOpCounter *out);

// # Safety
// `ctx` must be NULL or a live context.
void pmhe_context_reset_meter(const struct PmheContext *ctx);

// Encrypt a row-major `h * h` matrix under the collective key.
//
// # Safety
// `data` must point to `h * h` readable doubles; `out` must be writable.
enum PmheStatus pmhe_matrix_encrypt(const struct PmheContext *ctx,
                                    const double *data,
                                    size_t h,
                                    struct PmheMatrix **out);

// Collective decryption into `out` (row-major, `out_len >= h * h`).
// `roster` lists the participating party ids; NULL means all parties.
//
// # Safety
// Pointers must be valid for the given lengths; `m` must belong to `ctx`.
enum PmheStatus pmhe_matrix_decrypt(const struct PmheContext *ctx,
                                    const struct PmheMatrix *m,
                                    const uint16_t *roster,
                                    size_t roster_len,
                                    double *out,
                                    size_t out_len);

// Dimension h of an encrypted matrix, 0 for NULL.
//
// # Safety
// `m` must be NULL or a live matrix.
size_t pmhe_matrix_dim(const struct PmheMatrix *m);

// Remaining level of an encrypted matrix, 0 for NULL.
//
// # Safety
// `m` must be NULL or a live matrix.
uint32_t pmhe_matrix_level(const struct PmheMatrix *m);

// Encrypted product `a * b`.
//
// # Safety
// All handles must be live and belong to `ctx`; `out` must be writable.
enum PmheStatus pmhe_matrix_mult(const struct PmheContext *ctx,
                                 const struct PmheMatrix *a,
                                 const struct PmheMatrix *b,
                                 struct PmheMatrix **out);

// Encrypted transpose.
//
// # Safety
// Handles must be live and belong to `ctx`; `out` must be writable.
enum PmheStatus pmhe_matrix_transpose(const struct PmheContext *ctx,
                                      const struct PmheMatrix *a,
                                      struct PmheMatrix **out);

// # Safety
// `m` must come from this library and not be used afterwards.
void pmhe_matrix_free(struct PmheMatrix *m);

// Smallest composition depth k reaching (sigma, delta)-closeness with g_d.
//
// # Safety
// `out_k` must be writable.
enum PmheStatus pmhe_sign_min_depth(uint32_t d, uint32_t sigma, double delta, uint32_t *out_k);

// Plain evaluation of the k-fold composite at `x` in [-1, 1].
//
// # Safety
// `out` must be writable.
enum PmheStatus pmhe_sign_eval(uint32_t d,
                               uint32_t k,
                               uint32_t sigma,
                               double delta,
                               double x,
                               double *out);

// Run encrypted training from a JSON config. `data_dir` holds the party
// shards; NULL selects the synthetic dataset. `transport` is
// "in_process" or "tcp" (NULL means in_process). On success `*out_json`
// receives the metrics JSON, released with [`pmhe_string_free`].
//
// # Safety
// String arguments must be NUL-terminated; `out_json` must be writable.
enum PmheStatus pmhe_train_json(const char *config_json,
                                const char *data_dir,
                                const char *transport,
                                char **out_json);

// # Safety
// `s` must come from this library and not be used afterwards.
void pmhe_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMHE_H */
