#ifndef PHYFPS_H
#define PHYFPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Bumped on any incompatible change to this interface.
#define PHYFPS_ABI_VERSION 1

typedef enum PhyfpsStatus {
  PHYFPS_STATUS_OK = 0,
  PHYFPS_STATUS_NULL_POINTER = 1,
  PHYFPS_STATUS_INVALID_ARGUMENT = 2,
  PHYFPS_STATUS_IO = 3,
  PHYFPS_STATUS_FORMAT = 4,
  // Input data violates a precondition (too short, wrong rate, ...).
  PHYFPS_STATUS_DATA = 5,
  // The clip is too static for its PhyFPS to be observable.
  PHYFPS_STATUS_INSUFFICIENT_MOTION = 6,
  // Output buffer too small; the required length was written.
  PHYFPS_STATUS_BUFFER_TOO_SMALL = 7,
  PHYFPS_STATUS_PANIC = 8,
} PhyfpsStatus;

typedef enum PhyfpsStrategy {
  PHYFPS_STRATEGY_SHARP = 0,
  PHYFPS_STRATEGY_BLUR = 1,
  PHYFPS_STRATEGY_ROLLING_SHUTTER = 2,
} PhyfpsStrategy;

typedef enum PhyfpsPattern {
  PHYFPS_PATTERN_BLOB = 0,
  PHYFPS_PATTERN_GRATING = 1,
  PHYFPS_PATTERN_DISC = 2,
} PhyfpsPattern;

// Opaque regressor parameters.
typedef struct PhyfpsModel PhyfpsModel;

// Opaque frame sequence.
typedef struct PhyfpsSequence PhyfpsSequence;

typedef struct PhyfpsSequenceInfo {
  size_t width;
  size_t height;
  size_t frame_count;
  double meta_fps;
  // NaN when the sequence is unlabeled.
  double phy_fps_label;
} PhyfpsSequenceInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t phyfps_abi_version(void);

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next phyfps call on this thread.
const char *phyfps_last_error(void);

// Loads a `.fseq` file or a PGM directory.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PhyfpsStatus phyfps_sequence_load(const char *path, struct PhyfpsSequence **out);

// # Safety
// `seq` must be a live handle; `path` a NUL-terminated string.
enum PhyfpsStatus phyfps_sequence_save(const struct PhyfpsSequence *seq, const char *path);

// Builds a sequence from `frame_count * height * width` row-major samples in [0, 1].
// Pass NaN for `phy_fps_label` to leave it unlabeled.
//
// # Safety
// `samples` must point to that many doubles.
enum PhyfpsStatus phyfps_sequence_from_samples(size_t width,
                                               size_t height,
                                               size_t frame_count,
                                               const double *samples,
                                               double meta_fps,
                                               double phy_fps_label,
                                               struct PhyfpsSequence **out);

// Renders an analytic scene; its PhyFPS label equals `fps`.
// `pattern` is a `PhyfpsPattern` value.
//
// # Safety
// `out` must be writable.
enum PhyfpsStatus phyfps_sequence_render(uint32_t pattern,
                                         double velocity,
                                         double spatial_scale,
                                         size_t width,
                                         size_t height,
                                         double duration,
                                         double fps,
                                         struct PhyfpsSequence **out);

// # Safety
// `seq` must be a live handle; `info` writable.
enum PhyfpsStatus phyfps_sequence_info(const struct PhyfpsSequence *seq,
                                       struct PhyfpsSequenceInfo *info);

// Copies frame `index` (`width * height` doubles, row-major) into `dst`.
//
// # Safety
// `dst` must hold `capacity` doubles.
enum PhyfpsStatus phyfps_sequence_frame(const struct PhyfpsSequence *seq,
                                        size_t index,
                                        double *dst,
                                        size_t capacity);

// # Safety
// `seq` must come from this library and not be used afterwards. NULL is ignored.
void phyfps_sequence_free(struct PhyfpsSequence *seq);

// Camera-mechanics downsampling from `f_high` to `f_low`.
// `strategy` is a `PhyfpsStrategy` value.
//
// # Safety
// `seq` must be a live handle; `out` writable.
enum PhyfpsStatus phyfps_resample(const struct PhyfpsSequence *seq,
                                  uint32_t strategy,
                                  double f_high,
                                  double f_low,
                                  uint32_t window_divisor,
                                  struct PhyfpsSequence **out);

// # Safety
// `seq` must be a live handle; `out` writable.
enum PhyfpsStatus phyfps_upsample(const struct PhyfpsSequence *seq,
                                  double target_fps,
                                  struct PhyfpsSequence **out);

// Uniformly retimes to `rate` physical fps, played back at `output_fps`.
//
// # Safety
// `seq` must be a live handle; `out` writable.
enum PhyfpsStatus phyfps_retime_global(const struct PhyfpsSequence *seq,
                                       double rate,
                                       double output_fps,
                                       struct PhyfpsSequence **out);

// Loads a checkpoint JSON file written by `phyfps train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum PhyfpsStatus phyfps_model_load(const char *path, struct PhyfpsModel **out);

// Parses checkpoint JSON from a NUL-terminated string.
//
// # Safety
// `json` must be a NUL-terminated string; `out` writable.
enum PhyfpsStatus phyfps_model_from_json(const char *json, struct PhyfpsModel **out);

// # Safety
// `model` must come from this library and not be used afterwards. NULL is ignored.
void phyfps_model_free(struct PhyfpsModel *model);

// Predicted `ln(PhyFPS)` for the whole sequence as one clip.
//
// # Safety
// Handles must be live; `out` writable.
enum PhyfpsStatus phyfps_predict_log(const struct PhyfpsSequence *seq,
                                     const struct PhyfpsModel *model,
                                     double *out);

size_t phyfps_window_count(size_t frame_count, size_t window, size_t stride);

// Sliding-window PhyFPS predictions; motion-gated clips are written as NaN.
//
// `*count` receives the number of clips. If `capacity` is smaller, nothing
// is written to `dst` and `BufferTooSmall` is returned.
//
// # Safety
// Handles must be live; `dst` must hold `capacity` doubles; `count` writable.
enum PhyfpsStatus phyfps_sliding_window(const struct PhyfpsSequence *seq,
                                        const struct PhyfpsModel *model,
                                        size_t window,
                                        size_t stride,
                                        double *dst,
                                        size_t capacity,
                                        size_t *count);

// Mean squared error between log-predictions and `ln(labels)`.
//
// # Safety
// Both arrays must hold `n` doubles; `out` writable.
enum PhyfpsStatus phyfps_loss_log_mse(const double *log_predictions,
                                      const double *labels,
                                      size_t n,
                                      double *out);

// MAE (fps) and MAPE (percent).
//
// # Safety
// Both arrays must hold `n` doubles; outputs writable.
enum PhyfpsStatus phyfps_mae_mape(const double *predictions,
                                  const double *truths,
                                  size_t n,
                                  double *mae,
                                  double *mape);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHYFPS_H */
