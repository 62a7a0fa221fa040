#ifndef POLARITON_H
#define POLARITON_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum PolaritonStatus {
  POLARITON_STATUS_OK = 0,
  POLARITON_STATUS_NULL_POINTER = 1,
  // Invalid config text or argument.
  POLARITON_STATUS_INVALID_ARGUMENT = 2,
  // A numerical routine failed.
  POLARITON_STATUS_NUMERICAL = 3,
  // The output buffer is too small; the required length was written.
  POLARITON_STATUS_BUFFER_TOO_SMALL = 4,
  // The search found no instability below its ceiling.
  POLARITON_STATUS_NO_INSTABILITY = 5,
  POLARITON_STATUS_PANIC = 6,
} PolaritonStatus;

// Classification of the leading instability.
typedef enum PolaritonKind {
  POLARITON_KIND_STABLE = 0,
  POLARITON_KIND_ZERO_FREQUENCY = 1,
  POLARITON_KIND_FINITE_FREQUENCY = 2,
} PolaritonKind;

// Opaque model handle.
typedef struct PolaritonModel PolaritonModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Build a model from config text (the same format the command-line tool
// reads). A `lambda_ratio_sq` coupling is resolved against its threshold
// here, so this may take a moment for large systems.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum PolaritonStatus polariton_model_from_config(const char *text, struct PolaritonModel **out);

// Release a model. Null is accepted and ignored.
//
// # Safety
// `model` must come from [`polariton_model_from_config`] and not be used afterwards.
void polariton_model_free(struct PolaritonModel *model);

// Number of cavity modes, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t polariton_model_n_modes(const struct PolaritonModel *model);

// Coupling strength currently in use.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum PolaritonStatus polariton_model_lambda(const struct PolaritonModel *model, double *out);

// Replace the coupling strength.
//
// # Safety
// `model` must be a live handle.
enum PolaritonStatus polariton_model_set_lambda(struct PolaritonModel *model, double lambda);

// Analytic threshold of a single blue-detuned mode.
//
// # Safety
// `out` must be a valid pointer.
enum PolaritonStatus polariton_critical_coupling_single_mode(double delta0,
                                                             double kappa,
                                                             double *out);

// Numerical threshold of the model, ignoring its current coupling.
//
// `pole_re`/`pole_im` receive the leading pole just above threshold and may
// be null. A stable system returns `Ok` with kind `Stable` and NaN outputs.
//
// # Safety
// `model` must be a live handle; `lambda_c` and `kind` valid pointers.
enum PolaritonStatus polariton_critical_coupling(const struct PolaritonModel *model,
                                                 double *lambda_c,
                                                 enum PolaritonKind *kind,
                                                 double *pole_re,
                                                 double *pole_im);

// All poles at the current coupling.
//
// `count` receives the number of poles. If it exceeds `capacity` nothing
// else is written and `BufferTooSmall` is returned. `mode` may be null; it
// receives the cavity mode each pole is attributed to.
//
// # Safety
// `re`, `im` (and `mode` if non-null) must hold `capacity` elements.
enum PolaritonStatus polariton_find_poles(const struct PolaritonModel *model,
                                          double *re,
                                          double *im,
                                          size_t *mode,
                                          size_t capacity,
                                          size_t *count);

// Entry `(i, j)` of the spectral function at each of `n` real frequencies.
//
// # Safety
// `omegas`, `out_re` and `out_im` must hold `n` elements; `out_im` may be null.
enum PolaritonStatus polariton_spectral_function(const struct PolaritonModel *model,
                                                 const double *omegas,
                                                 size_t n,
                                                 size_t i,
                                                 size_t j,
                                                 double *out_re,
                                                 double *out_im);

// Copy the calling thread's last error message into `buf` (NUL-terminated,
// truncated to fit) and return its full length in bytes, excluding the NUL.
//
// # Safety
// `buf` must hold `len` bytes, or be null to query the length.
size_t polariton_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *polariton_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLARITON_H */
