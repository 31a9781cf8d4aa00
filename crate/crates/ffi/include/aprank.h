#ifndef APRANK_H
#define APRANK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AprankStatus {
  APRANK_STATUS_OK = 0,
  APRANK_STATUS_NULL_POINTER = 1,
  APRANK_STATUS_INVALID_ARGUMENT = 2,
  APRANK_STATUS_PARSE = 3,
  APRANK_STATUS_SHAPE_MISMATCH = 4,
  // An algorithm could not meet its guarantee (search exhausted,
  // retries used up, iteration budget reached).
  APRANK_STATUS_CONTRACT_FAILURE = 5,
  // A computation was refused because it would exceed a size budget.
  APRANK_STATUS_BUDGET = 6,
  APRANK_STATUS_IO = 7,
  APRANK_STATUS_PANIC = 8,
} AprankStatus;

// Opaque list of weighted rank-one terms.
typedef struct AprankDecomposition AprankDecomposition;

// Opaque symmetric tensor.
typedef struct AprankTensor AprankTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next failing call on the same thread.
const char *aprank_last_error(void);

// Library version as a static string.
const char *aprank_version(void);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void aprank_string_free(char *s);

// Parses a tensor from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum AprankStatus aprank_tensor_from_json(const char *json, struct AprankTensor **out);

// Serializes a tensor; free the result with [`aprank_string_free`].
//
// # Safety
// `t` must be a live tensor handle; `out` must be writable.
enum AprankStatus aprank_tensor_to_json(const struct AprankTensor *t, char **out);

// # Safety
// `t` must be null or a live tensor handle, not used afterwards.
void aprank_tensor_free(struct AprankTensor *t);

// Number of variables and degree.
//
// # Safety
// `t` must be a live tensor handle; `n` and `d` must be writable.
enum AprankStatus aprank_tensor_shape(const struct AprankTensor *t, size_t *n, size_t *d);

// Evaluates the tensor's form at `x[0..len]`.
//
// # Safety
// `x` must point to `len` doubles; `out` must be writable.
enum AprankStatus aprank_tensor_eval(const struct AprankTensor *t,
                                     const double *x,
                                     size_t len,
                                     double *out);

// Hilbert–Schmidt norm.
//
// # Safety
// `t` must be a live tensor handle; `out` must be writable.
enum AprankStatus aprank_tensor_hs_norm(const struct AprankTensor *t, double *out);

// `L_r` norm on the sphere: exact for even `r` when affordable, else Monte
// Carlo over `samples` points. `std_error` may be null.
//
// # Safety
// `t` must be a live tensor handle; `value` must be writable.
enum AprankStatus aprank_tensor_lr_norm(const struct AprankTensor *t,
                                        double r,
                                        size_t samples,
                                        uint64_t seed,
                                        double *value,
                                        double *std_error);

// Parses a decomposition from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum AprankStatus aprank_decomposition_from_json(const char *json,
                                                 struct AprankDecomposition **out);

// Serializes a decomposition; free the result with [`aprank_string_free`].
//
// # Safety
// `d` must be a live decomposition handle; `out` must be writable.
enum AprankStatus aprank_decomposition_to_json(const struct AprankDecomposition *d, char **out);

// # Safety
// `d` must be null or a live decomposition handle, not used afterwards.
void aprank_decomposition_free(struct AprankDecomposition *d);

// Number of terms.
//
// # Safety
// `d` must be a live decomposition handle; `out` must be writable.
enum AprankStatus aprank_decomposition_len(const struct AprankDecomposition *d, size_t *out);

// Sums the terms into a tensor.
//
// # Safety
// `d` must be a live decomposition handle; `out` must be writable.
enum AprankStatus aprank_decomposition_materialize(const struct AprankDecomposition *d,
                                                   struct AprankTensor **out);

// Greedy decomposition with `‖f - f̃‖_r < epsilon`; pass `r = INFINITY` for
// the sup norm.
//
// # Safety
// `t` must be a live tensor handle; `out` must be writable.
enum AprankStatus aprank_decompose_energy(const struct AprankTensor *t,
                                          double r,
                                          double epsilon,
                                          size_t samples,
                                          uint64_t seed,
                                          struct AprankDecomposition **out);

// Maurey sparsification in `norm` ("hs", "l<r>" or "linf").
//
// # Safety
// `d` must be a live decomposition handle, `norm` a NUL-terminated string
// and `out` writable.
enum AprankStatus aprank_sparsify(const struct AprankDecomposition *d,
                                  const char *norm,
                                  double epsilon,
                                  uint64_t seed,
                                  struct AprankDecomposition **out);

// Frank–Wolfe decomposition with HS error at most `epsilon`, given a guess
// `nuclear_guess` for the nuclear norm of the tensor.
//
// # Safety
// `t` must be a live tensor handle; `out` must be writable.
enum AprankStatus aprank_fw_decompose(const struct AprankTensor *t,
                                      double epsilon,
                                      double nuclear_guess,
                                      uint64_t seed,
                                      struct AprankDecomposition **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APRANK_H */
