#ifndef FRAMERESTORE_H
#define FRAMERESTORE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FrStatus {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_POINTER = 1,
  FR_STATUS_INVALID_ARGUMENT = 2,
  FR_STATUS_DIMENSION_MISMATCH = 3,
  FR_STATUS_PARSE = 4,
  FR_STATUS_IO = 5,
  FR_STATUS_CONFIG = 6,
  FR_STATUS_NUMERICAL = 7,
  FR_STATUS_PANIC = 8,
} FrStatus;

typedef enum FrPsnrMode {
  FR_PSNR_MODE_CT = 0,
  FR_PSNR_MODE_GRAY255 = 1,
  FR_PSNR_MODE_PEAK255 = 2,
} FrPsnrMode;

typedef enum FrWavelet {
  FR_WAVELET_HAAR = 0,
  FR_WAVELET_PIECEWISE_LINEAR = 1,
  FR_WAVELET_PIECEWISE_CUBIC = 2,
  FR_WAVELET_IDENTITY = 3,
} FrWavelet;

typedef enum FrBoundary {
  FR_BOUNDARY_SYMMETRIC = 0,
  FR_BOUNDARY_PERIODIC = 1,
} FrBoundary;

typedef enum FrSetKind {
  FR_SET_KIND_ALL = 0,
  FR_SET_KIND_LOWER_BOUNDED = 1,
  FR_SET_KIND_BOX = 2,
} FrSetKind;

typedef struct FrCoefficients FrCoefficients;

typedef struct FrFramelet FrFramelet;

typedef struct FrImage FrImage;

typedef struct FrOperator FrOperator;

/**
 * Feasible set for the restored image; `upper` is ignored unless `kind`
 * is `Box`, `lower` is ignored for `All`.
 */
typedef struct FrFeasibleSet {
  enum FrSetKind kind;
  double lower;
  double upper;
} FrFeasibleSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null if the last
 * call succeeded. Valid until the next call into this library.
 */
const char *fr_last_error_message(void);

/**
 * Copies `width * height` row-major pixels from `data`.
 */
enum FrStatus fr_image_new(size_t width, size_t height, const double *data, struct FrImage **out);

void fr_image_free(struct FrImage *img);

size_t fr_image_width(const struct FrImage *img);

size_t fr_image_height(const struct FrImage *img);

/**
 * Borrowed pointer to the row-major pixels, valid while `img` lives.
 */
const double *fr_image_data(const struct FrImage *img);

enum FrStatus fr_psnr(const struct FrImage *img,
                      const struct FrImage *reference,
                      enum FrPsnrMode mode,
                      double *out);

enum FrStatus fr_add_gaussian_noise(const struct FrImage *img,
                                    double sigma,
                                    uint64_t seed,
                                    struct FrImage **out);

/**
 * Modified Shepp-Logan phantom, values in [0, 1].
 */
enum FrStatus fr_phantom(size_t size, struct FrImage **out);

enum FrStatus fr_framelet_new(enum FrWavelet wavelet,
                              size_t levels,
                              size_t width,
                              size_t height,
                              enum FrBoundary boundary,
                              struct FrFramelet **out);

void fr_framelet_free(struct FrFramelet *frame);

enum FrStatus fr_decompose(const struct FrFramelet *frame,
                           const struct FrImage *img,
                           struct FrCoefficients **out);

enum FrStatus fr_reconstruct(const struct FrFramelet *frame,
                             const struct FrCoefficients *coeffs,
                             struct FrImage **out);

void fr_coefficients_free(struct FrCoefficients *coeffs);

size_t fr_coefficients_len(const struct FrCoefficients *coeffs);

/**
 * Borrowed mutable pointer to the plane-major coefficient array.
 */
double *fr_coefficients_data(struct FrCoefficients *coeffs);

size_t fr_coefficients_count_nonzero(const struct FrCoefficients *coeffs);

/**
 * Zeroes, in place, every coefficient with magnitude at most `threshold`.
 */
enum FrStatus fr_hard_threshold(struct FrCoefficients *coeffs, double threshold);

enum FrStatus fr_operator_identity(size_t n, struct FrOperator **out);

/**
 * Normalized `size x size` Gaussian blur with symmetric boundary handling.
 */
enum FrStatus fr_operator_gaussian_blur(size_t width,
                                        size_t height,
                                        size_t size,
                                        double std,
                                        struct FrOperator **out);

/**
 * Fan-beam projection matrix for a `side x side` grid with the default
 * geometry (360 views, `2 * side` detectors).
 */
enum FrStatus fr_operator_fanbeam(size_t side, struct FrOperator **out);

void fr_operator_free(struct FrOperator *op);

size_t fr_operator_input_len(const struct FrOperator *op);

size_t fr_operator_output_len(const struct FrOperator *op);

/**
 * `out = A x`; `x` has `input_len` entries and `out` has `output_len`.
 */
enum FrStatus fr_operator_apply(const struct FrOperator *op,
                                const double *x,
                                size_t x_len,
                                double *out,
                                size_t out_len);

/**
 * Penalty decomposition restoration of the measurements `f`.
 *
 * `lambda` holds one weight or one per level. `rho0` and `delta` set the
 * penalty schedule; the other solver settings take library defaults.
 * `converged` (nullable) receives 1 if the outer stopping rule was met.
 */
enum FrStatus fr_pd_solve(const struct FrOperator *op,
                          const struct FrFramelet *frame,
                          const double *f,
                          size_t f_len,
                          const double *lambda,
                          size_t lambda_len,
                          struct FrFeasibleSet set,
                          double rho0,
                          double delta,
                          struct FrImage **out,
                          int32_t *converged);

/**
 * Runs a full experiment from a JSON config (same schema as the CLI).
 * Any of the output pointers may be null.
 */
enum FrStatus fr_run_experiment_json(const char *config_json,
                                     double *psnr_db,
                                     struct FrImage **restored,
                                     int32_t *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRAMERESTORE_H */
