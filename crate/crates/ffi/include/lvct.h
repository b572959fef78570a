#ifndef LVCT_H
#define LVCT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Non-zero values match the `lvct` CLI exit codes.
 */
typedef enum LvctStatus {
  LVCT_STATUS_OK = 0,
  LVCT_STATUS_NULL_POINTER = 1,
  LVCT_STATUS_IO = 3,
  LVCT_STATUS_BAD_MAGIC = 4,
  LVCT_STATUS_TRUNCATED = 5,
  LVCT_STATUS_DIM_OVERFLOW = 6,
  LVCT_STATUS_FORMAT = 7,
  LVCT_STATUS_INVALID_ARGUMENT = 8,
  LVCT_STATUS_SHAPE_MISMATCH = 9,
  LVCT_STATUS_NON_FINITE = 10,
  LVCT_STATUS_CONFIG = 11,
  LVCT_STATUS_MISSING_CHECKPOINT = 12,
  LVCT_STATUS_GEOMETRY_MISMATCH = 13,
  LVCT_STATUS_DIVERGED = 14,
  LVCT_STATUS_GRAD_CHECK = 15,
  LVCT_STATUS_PANIC = 99,
} LvctStatus;

typedef enum LvctFilter {
  LVCT_FILTER_RAM_LAK = 0,
  LVCT_FILTER_SHEPP_LOGAN = 1,
  LVCT_FILTER_HANN = 2,
} LvctFilter;

typedef enum LvctCutMode {
  LVCT_CUT_MODE_REAR = 0,
  LVCT_CUT_MODE_MIDDLE = 1,
} LvctCutMode;

typedef struct LvctImage LvctImage;

typedef struct LvctMasked LvctMasked;

typedef struct LvctSinogram LvctSinogram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *lvct_last_error(void);

/**
 * # Safety
 * `data` must point to `width * height` doubles; `out` must be writable.
 */
enum LvctStatus lvct_image_new(size_t width,
                               size_t height,
                               const double *data,
                               struct LvctImage **out);

/**
 * # Safety
 * `img` must come from this library and not be used afterwards. NULL is ignored.
 */
void lvct_image_free(struct LvctImage *img);

/**
 * # Safety
 * `img` must be a live handle; `width` and `height` must be writable.
 */
enum LvctStatus lvct_image_dims(const struct LvctImage *img, size_t *width, size_t *height);

/**
 * # Safety
 * `img` must be a live handle; `out` must hold `len` doubles.
 */
enum LvctStatus lvct_image_data(const struct LvctImage *img, double *out, size_t len);

/**
 * # Safety
 * `out` must be writable.
 */
enum LvctStatus lvct_shepp_logan(size_t size, struct LvctImage **out);

/**
 * # Safety
 * `data` must point to `n_detectors * n_angles` doubles; `out` must be writable.
 */
enum LvctStatus lvct_sinogram_new(size_t n_detectors,
                                  size_t n_angles,
                                  const double *data,
                                  struct LvctSinogram **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. NULL is ignored.
 */
void lvct_sinogram_free(struct LvctSinogram *s);

/**
 * # Safety
 * `s` must be a live handle; the outputs must be writable.
 */
enum LvctStatus lvct_sinogram_dims(const struct LvctSinogram *s,
                                   size_t *n_detectors,
                                   size_t *n_angles);

/**
 * # Safety
 * `s` must be a live handle; `out` must hold `len` doubles.
 */
enum LvctStatus lvct_sinogram_data(const struct LvctSinogram *s, double *out, size_t len);

/**
 * # Safety
 * `img` must be a live handle; `out` must be writable.
 */
enum LvctStatus lvct_radon(const struct LvctImage *img,
                           size_t n_angles,
                           size_t n_detectors,
                           struct LvctSinogram **out);

/**
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum LvctStatus lvct_fbp(const struct LvctSinogram *s,
                         enum LvctFilter kind,
                         size_t size,
                         struct LvctImage **out);

/**
 * SART-TV with default parameters apart from `iterations`. `valid` is
 * either NULL (all views) or `n_angles` bytes, non-zero for measured views.
 *
 * # Safety
 * `s` must be a live handle; `valid` as above; `out` must be writable.
 */
enum LvctStatus lvct_sart_tv(const struct LvctSinogram *s,
                             const uint8_t *valid,
                             size_t iterations,
                             size_t size,
                             struct LvctImage **out);

/**
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum LvctStatus lvct_cut(const struct LvctSinogram *s,
                         enum LvctCutMode mode,
                         double degrees,
                         struct LvctMasked **out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards. NULL is ignored.
 */
void lvct_masked_free(struct LvctMasked *m);

/**
 * Copy of the zero-filled sinogram.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum LvctStatus lvct_masked_sinogram(const struct LvctMasked *m, struct LvctSinogram **out);

/**
 * Mask as `n_angles` bytes, 1 for measured views.
 *
 * # Safety
 * `m` must be a live handle; `out` must hold `len` bytes.
 */
enum LvctStatus lvct_masked_mask(const struct LvctMasked *m, uint8_t *out, size_t len);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum LvctStatus lvct_merge_radon(const struct LvctMasked *m,
                                 enum LvctFilter kind,
                                 struct LvctSinogram **out);

/**
 * PSNR (peak 1) and SSIM of `test` against `reference`.
 *
 * # Safety
 * Both handles must be live; `psnr` and `ssim` must be writable.
 */
enum LvctStatus lvct_metrics(const struct LvctImage *test,
                             const struct LvctImage *reference,
                             double *psnr,
                             double *ssim);

/**
 * Run the configured three-stage pipeline and report the mean metrics.
 *
 * # Safety
 * `config_path` must be a NUL-terminated path; `psnr` and `ssim` must be writable.
 */
enum LvctStatus lvct_run_pipeline(const char *config_path, double *psnr, double *ssim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LVCT_H */
