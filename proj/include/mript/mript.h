/* mript C API.
 *
 * All functions return MRIPT_OK on success. On failure the status names the
 * error class and mript_last_error() returns a message for the calling
 * thread. Objects are opaque and owned by the caller; release them with the
 * matching *_free function (NULL is accepted). */
#ifndef MRIPT_MRIPT_H
#define MRIPT_MRIPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MRIPT_API __declspec(dllexport)
#else
#define MRIPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mript_status {
  MRIPT_OK = 0,
  MRIPT_ERR_INVALID_ARGUMENT = 1,
  MRIPT_ERR_DIMENSION_MISMATCH = 2,
  MRIPT_ERR_IO = 3,
  MRIPT_ERR_BAD_MAGIC = 4,
  MRIPT_ERR_TRUNCATED = 5,
  MRIPT_ERR_VERSION_MISMATCH = 6,
  MRIPT_ERR_CORRUPT_HEADER = 7,
  MRIPT_ERR_MISSING_TENSOR = 8,
  MRIPT_ERR_NON_FINITE = 9,
  MRIPT_ERR_INFEASIBLE = 10,
  MRIPT_ERR_UNSUPPORTED = 11,
  MRIPT_ERR_UNKNOWN_KEY = 12,
  MRIPT_ERR_INTERNAL = 99
} mript_status;

typedef struct mript_mask mript_mask;
typedef struct mript_image mript_image;
typedef struct mript_model mript_model;

MRIPT_API const char* mript_version(void);
MRIPT_API const char* mript_status_name(mript_status status);
/* Message of the last failure on this thread ("" if none). */
MRIPT_API const char* mript_last_error(void);

/* Receives progress lines of long-running calls; NULL restores stderr. */
typedef void (*mript_log_fn)(const char* line, void* user);
MRIPT_API void mript_set_log_callback(mript_log_fn fn, void* user);

/* ---- masks ---- */

/* family: "random", "equispaced", "gaussian1d" or "gaussian2d".
 * center_fraction < 0 selects the family default. */
MRIPT_API mript_status mript_mask_create(const char* family, double acceleration, size_t height,
                                         size_t width, uint64_t seed, double center_fraction,
                                         mript_mask** out);
MRIPT_API mript_status mript_mask_load(const char* path, mript_mask** out);
MRIPT_API mript_status mript_mask_save(const mript_mask* mask, const char* path);
MRIPT_API mript_status mript_mask_save_png(const mript_mask* mask, const char* path);
MRIPT_API mript_status mript_mask_achieved_acceleration(const mript_mask* mask, double* out);
MRIPT_API mript_status mript_mask_kept_count(const mript_mask* mask, size_t* out);
MRIPT_API mript_status mript_mask_dims(const mript_mask* mask, size_t* height, size_t* width);
MRIPT_API void mript_mask_free(mript_mask* mask);

/* ---- images ([1,H,W] float32) ---- */

MRIPT_API mript_status mript_image_create(size_t height, size_t width, const float* data,
                                          mript_image** out);
/* .png is read as PNG, anything else as an MRIT raster. */
MRIPT_API mript_status mript_image_load(const char* path, mript_image** out);
/* .png writes an 8-bit PNG of values clamped to [0,1], anything else an MRIT raster. */
MRIPT_API mript_status mript_image_save(const mript_image* image, const char* path);
MRIPT_API mript_status mript_image_dims(const mript_image* image, size_t* height, size_t* width);
/* Row-major pixels, valid until the image is freed. */
MRIPT_API const float* mript_image_data(const mript_image* image);
MRIPT_API void mript_image_free(mript_image* image);

/* ---- degradation and metrics ---- */

MRIPT_API mript_status mript_degrade(const mript_image* clean, const mript_mask* mask,
                                     mript_image** out);
/* +infinity for identical images. */
MRIPT_API mript_status mript_psnr(const mript_image* x, const mript_image* clean, double* out);
/* global_mode != 0 evaluates whole-image moments instead of 7x7 windows. */
MRIPT_API mript_status mript_ssim(const mript_image* x, const mript_image* clean, int global_mode,
                                  double* out);
MRIPT_API mript_status mript_error_map(const mript_image* x, const mript_image* clean, double gain,
                                       mript_image** out);

/* Writes `count` phantoms as phantom_NNNN.mrit plus manifest.csv into out_dir;
 * the last `test_count` are assigned to the test split, the rest to train. */
MRIPT_API mript_status mript_phantoms_write(size_t count, size_t size, uint64_t seed,
                                            size_t test_count, const char* out_dir);

/* ---- models ---- */

MRIPT_API mript_status mript_model_load(const char* checkpoint, mript_model** out);
MRIPT_API mript_status mript_model_image_size(const mript_model* model, size_t* out);
MRIPT_API mript_status mript_model_forward(const mript_model* model, const mript_image* input,
                                           const char* family, double acceleration,
                                           mript_image** out);
/* Writes the routed pair name (e.g. "r6") into buf, NUL-terminated. */
MRIPT_API mript_status mript_model_route(const mript_model* model, const char* family,
                                         double acceleration, char* buf, size_t buf_size);
MRIPT_API void mript_model_free(mript_model* model);

/* ---- experiments (config is a JSON file path) ---- */

/* Validates the config without side effects. */
MRIPT_API mript_status mript_config_check(const char* config_path);
MRIPT_API mript_status mript_experiment_pretrain(const char* config_path);
MRIPT_API mript_status mript_experiment_finetune(const char* config_path, const char* checkpoint);
MRIPT_API mript_status mript_experiment_eval(const char* config_path, const char* checkpoint,
                                             int zero_shot);
MRIPT_API mript_status mript_experiment_stability(const char* config_path, const char* checkpoint,
                                                  const size_t* sizes, size_t n_sizes,
                                                  size_t repeats);

#ifdef __cplusplus
}
#endif

#endif /* MRIPT_MRIPT_H */
