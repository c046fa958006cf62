#ifndef CASSI_H
#define CASSI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CassiScheme {
  CASSI_SCHEME_RANDOM = 0,
  CASSI_SCHEME_COMPLEMENTARY = 1,
} CassiScheme;

/*
 Status codes. Values 2, 3 and 4 match the `cassi` CLI exit codes.
 */
typedef enum CassiStatus {
  CASSI_STATUS_OK = 0,
  CASSI_STATUS_NULL_POINTER = 1,
  CASSI_STATUS_INVALID_ARGUMENT = 2,
  CASSI_STATUS_IO = 3,
  CASSI_STATUS_DIVERGED = 4,
  CASSI_STATUS_DIMENSION_MISMATCH = 5,
  CASSI_STATUS_PANIC = 99,
} CassiStatus;

typedef enum CassiWavelet {
  CASSI_WAVELET_HAAR = 0,
  CASSI_WAVELET_DB4 = 1,
} CassiWavelet;

/*
 Opaque sensing model.
 */
typedef struct CassiModel CassiModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the last failed call on this thread, or NULL.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *cassi_last_error(void);

/*
 `K * M * (N + L + 1)`.
 */
uintptr_t cassi_measurement_count(uintptr_t rows, uintptr_t cols, uintptr_t bands, uintptr_t shots);

/*
 Creates a model with generated apertures.

 `weights` points to three dispersion weights, or is NULL for the default
 `(0.25, 0.5, 0.25)`.

 # Safety
 `weights` must be NULL or point to 3 readable doubles; `out` must be a
 valid pointer to write the handle to.
 */
enum CassiStatus cassi_model_new(uintptr_t rows,
                                 uintptr_t cols,
                                 uintptr_t bands,
                                 uintptr_t shots,
                                 enum CassiScheme scheme,
                                 uint64_t seed,
                                 const double *weights,
                                 struct CassiModel **out);

/*
 Creates a model from caller-supplied binary masks laid out `i + M*j + M*N*k`.

 # Safety
 `masks` must point to `shots * rows * cols` readable bytes; `weights` as in
 `cassi_model_new`; `out` must be writable.
 */
enum CassiStatus cassi_model_from_masks(uintptr_t rows,
                                        uintptr_t cols,
                                        uintptr_t bands,
                                        uintptr_t shots,
                                        const uint8_t *masks,
                                        const double *weights,
                                        struct CassiModel **out);

/*
 Releases a model. NULL is ignored.

 # Safety
 `model` must come from this library and not have been freed already.
 */
void cassi_model_free(struct CassiModel *model);

/*
 Signal length `n = M*N*L`, or 0 for a NULL handle.

 # Safety
 `model` must be NULL or a live handle.
 */
uintptr_t cassi_model_signal_len(const struct CassiModel *model);

/*
 Measurement length `m`, or 0 for a NULL handle.

 # Safety
 `model` must be NULL or a live handle.
 */
uintptr_t cassi_model_measurement_len(const struct CassiModel *model);

/*
 `g = H f`.

 # Safety
 `f` must hold `f_len` doubles and `g` must have room for `g_len`.
 */
enum CassiStatus cassi_forward(const struct CassiModel *model,
                               const double *f,
                               uintptr_t f_len,
                               double *g,
                               uintptr_t g_len);

/*
 `f = Hᵀ g`.

 # Safety
 `g` must hold `g_len` doubles and `f` must have room for `f_len`.
 */
enum CassiStatus cassi_adjoint(const struct CassiModel *model,
                               const double *g,
                               uintptr_t g_len,
                               double *f,
                               uintptr_t f_len);

/*
 Damped AMP reconstruction. `levels < 0` selects the default depth.
 On divergence `iterations_done` (if not NULL) receives the failing iteration.

 # Safety
 Buffers must match their lengths; `iterations_done` may be NULL.
 */
enum CassiStatus cassi_amp_reconstruct(const struct CassiModel *model,
                                       const double *g,
                                       uintptr_t g_len,
                                       double alpha,
                                       uintptr_t max_iter,
                                       enum CassiWavelet wavelet,
                                       int32_t levels,
                                       double *f_out,
                                       uintptr_t f_len,
                                       uintptr_t *iterations_done);

/*
 ℓ1-regularized least squares by monotone FISTA.

 # Safety
 Buffers must match their lengths.
 */
enum CassiStatus cassi_fista_reconstruct(const struct CassiModel *model,
                                         const double *g,
                                         uintptr_t g_len,
                                         double lambda,
                                         uintptr_t iterations,
                                         enum CassiWavelet wavelet,
                                         int32_t levels,
                                         double *f_out,
                                         uintptr_t f_len);

/*
 Adds seeded Gaussian noise at the requested cassi-snr (dB).

 # Safety
 `clean` and `noisy` must each hold `len` doubles; `sigma_out` may be NULL.
 */
enum CassiStatus cassi_add_noise(const double *clean,
                                 uintptr_t len,
                                 double snr_db,
                                 uint64_t seed,
                                 double *noisy,
                                 double *sigma_out);

/*
 Band-averaged PSNR of `estimate` against `reference`; infinite bands are
 skipped and the result is `+inf` only if every band matches exactly.

 # Safety
 Both cubes must hold `rows * cols * bands` doubles; `out` must be writable.
 */
enum CassiStatus cassi_avg_psnr(const double *reference,
                                const double *estimate,
                                uintptr_t rows,
                                uintptr_t cols,
                                uintptr_t bands,
                                double peak,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASSI_H */
