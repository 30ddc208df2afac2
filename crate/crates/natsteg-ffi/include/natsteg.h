#ifndef NATSTEG_H
#define NATSTEG_H

/* Generated by cbindgen from natsteg-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes; nonzero values match the CLI exit-code categories.
 */
typedef enum ns_status {
  NS_OK = 0,
  /**
   * Invalid argument or null pointer.
   */
  NS_ERR_ARG = 2,
  /**
   * File I/O or format error.
   */
  NS_ERR_IO = 3,
  /**
   * Noise-model violation.
   */
  NS_ERR_MODEL = 4,
  /**
   * Verification failure.
   */
  NS_ERR_VERIFY = 5,
} ns_status;

typedef struct ns_model ns_model;

typedef struct ns_params ns_params;

typedef struct ns_probmap ns_probmap;

typedef struct ns_raster ns_raster;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 */
size_t ns_last_error(char *buf, size_t len);

/**
 * Reads a PGM/PPM file (8- or 16-bit).
 */
enum ns_status ns_raster_read(const char *path, struct ns_raster **out);

enum ns_status ns_raster_write(const struct ns_raster *r, const char *path);

enum ns_status ns_raster_width(const struct ns_raster *r, size_t *out);

enum ns_status ns_raster_height(const struct ns_raster *r, size_t *out);

enum ns_status ns_raster_channels(const struct ns_raster *r, size_t *out);

enum ns_status ns_raster_bit_depth(const struct ns_raster *r, uint8_t *out);

/**
 * Sample at (x, y, channel).
 */
enum ns_status ns_raster_get(const struct ns_raster *r,
                             size_t x,
                             size_t y,
                             size_t channel,
                             uint16_t *out);

void ns_raster_free(struct ns_raster *r);

enum ns_status ns_model_new(double a, double b, struct ns_model **out);

enum ns_status ns_model_load(const char *path, struct ns_model **out);

enum ns_status ns_model_save(const struct ns_model *m, const char *path);

/**
 * Slope of the noise-variance line on normalized intensity.
 */
enum ns_status ns_model_a(const struct ns_model *m, double *out);

/**
 * Intercept of the noise-variance line.
 */
enum ns_status ns_model_b(const struct ns_model *m, double *out);

void ns_model_free(struct ns_model *m);

/**
 * Difference model between a source and a noisier target, scaled to the
 * given output bit depth (8 or 16).
 */
enum ns_status ns_params_from_models(const struct ns_model *source,
                                     const struct ns_model *target,
                                     uint8_t bit_depth,
                                     struct ns_params **out);

enum ns_status ns_params_load(const char *path, struct ns_params **out);

enum ns_status ns_params_save(const struct ns_params *p, const char *path);

/**
 * Wets the minimum-code pixels in addition to the saturation rule.
 */
enum ns_status ns_params_set_wet_dark(struct ns_params *p, bool wet_dark);

void ns_params_free(struct ns_params *p);

/**
 * Per-pixel change probabilities for the quantization-only pipeline.
 * `k_max = 0` derives the support bound from the variance.
 */
enum ns_status ns_probs_compute(const struct ns_raster *cover,
                                const struct ns_params *params,
                                size_t k_max,
                                struct ns_probmap **out);

/**
 * Total payload in bits and the per-pixel rate.
 */
enum ns_status ns_probs_payload(const struct ns_probmap *m, double *out_bits, double *out_bpp);

void ns_probs_free(struct ns_probmap *m);

/**
 * Runs a developing plan (inline grammar, e.g. "downsample box 2;
 * quantize8") with embedding and returns the developed stego raster.
 */
enum ns_status ns_embed_plan(const struct ns_raster *cover,
                             const struct ns_params *params,
                             const char *plan,
                             uint64_t seed,
                             struct ns_raster **out);

/**
 * Adds the raw-domain stego signal without developing; output keeps the
 * cover's bit depth.
 */
enum ns_status ns_embed_raw(const struct ns_raster *cover,
                            const struct ns_params *params,
                            uint64_t seed,
                            struct ns_raster **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NATSTEG_H */
