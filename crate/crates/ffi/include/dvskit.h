/* C interface to dvskit. Link dvskit_ffi (static or shared). */

#ifndef DVSKIT_H
#define DVSKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible function.
 */
typedef enum {
  DVS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DVS_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument value was rejected; see the error message.
   */
  DVS_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  DVS_STATUS_UTF8 = 3,
  /**
   * A file could not be read or written.
   */
  DVS_STATUS_IO = 4,
  /**
   * Input bytes or text failed to decode.
   */
  DVS_STATUS_PARSE = 5,
  /**
   * An internal invariant failure was caught at the boundary.
   */
  DVS_STATUS_PANIC = 6,
} DvsStatus;

/**
 * Opaque per-pixel polarity-sum grid. Created by
 * [`dvskit_stream_accumulate`], released with [`dvskit_grid_free`].
 */
typedef struct DvsGrid DvsGrid;

/**
 * Opaque event stream. Create with one of the `dvskit_stream_*`
 * constructors, release with [`dvskit_stream_free`].
 */
typedef struct DvsStream DvsStream;

/**
 * One sensor event. `polarity` is +1 (brighter) or -1 (darker).
 */
typedef struct {
  /**
   * Timestamp in microseconds.
   */
  uint64_t t_us;
  /**
   * Pixel column, 0-based.
   */
  uint16_t x;
  /**
   * Pixel row, 0-based.
   */
  uint16_t y;
  int8_t polarity;
} DvsEvent;

/**
 * Axis-aligned detection box in pixel coordinates, `x0 < x1`, `y0 < y1`.
 */
typedef struct {
  double x0;
  double y0;
  double x1;
  double y1;
  /**
   * Detector confidence in [0, 1].
   */
  double confidence;
} DvsBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *dvskit_version(void);

/**
 * Message describing the most recent failure on the calling thread, empty
 * if nothing failed yet. The pointer stays valid until the next failing
 * call on the same thread.
 */
const char *dvskit_last_error_message(void);

/**
 * Decodes an EVT1 byte buffer into a new stream handle.
 *
 * `bytes` may be null only when `len` is zero.
 */
DvsStatus dvskit_stream_parse_evt1(const uint8_t *bytes, size_t len, DvsStream **out);

/**
 * Reads and decodes an EVT1 file.
 */
DvsStatus dvskit_stream_read_evt1(const char *path, DvsStream **out);

/**
 * Parses CSV event text (`t_us,x,y,p` header) for a sensor of the given
 * geometry.
 */
DvsStatus dvskit_stream_parse_csv(const char *text,
                                  uint16_t width,
                                  uint16_t height,
                                  DvsStream **out);

/**
 * Builds a stream from caller-supplied events, enforcing the stream
 * invariants: nonzero sensor dimensions, coordinates inside
 * `width` x `height`, non-decreasing timestamps, polarity +1 or -1.
 *
 * `events` may be null only when `count` is zero.
 */
DvsStatus dvskit_stream_from_events(const DvsEvent *events,
                                    size_t count,
                                    uint16_t width,
                                    uint16_t height,
                                    DvsStream **out);

/**
 * Encodes the stream as EVT1 and writes it to `path`.
 */
DvsStatus dvskit_stream_write_evt1(const DvsStream *stream, const char *path);

/**
 * Releases a stream handle. Null is ignored.
 */
void dvskit_stream_free(DvsStream *stream);

/**
 * Number of events in the stream; 0 for a null handle.
 */
size_t dvskit_stream_len(const DvsStream *stream);

/**
 * Sensor width in pixels; 0 for a null handle.
 */
uint16_t dvskit_stream_width(const DvsStream *stream);

/**
 * Sensor height in pixels; 0 for a null handle.
 */
uint16_t dvskit_stream_height(const DvsStream *stream);

/**
 * Copies up to `capacity` events in stream order into `buffer` and returns
 * the number copied. A null handle or buffer copies nothing. Call
 * [`dvskit_stream_len`] first to size the buffer.
 */
size_t dvskit_stream_copy_events(const DvsStream *stream, DvsEvent *buffer, size_t capacity);

/**
 * Sums event polarities per pixel over `[t0_us, t0_us + duration_us)` and
 * returns the grid as a new handle.
 */
DvsStatus dvskit_stream_accumulate(const DvsStream *stream,
                                   uint64_t t0_us,
                                   uint64_t duration_us,
                                   DvsGrid **out);

/**
 * Releases a grid handle. Null is ignored.
 */
void dvskit_grid_free(DvsGrid *grid);

/**
 * Grid width in pixels; 0 for a null handle.
 */
uint16_t dvskit_grid_width(const DvsGrid *grid);

/**
 * Grid height in pixels; 0 for a null handle.
 */
uint16_t dvskit_grid_height(const DvsGrid *grid);

/**
 * Window start in microseconds; 0 for a null handle.
 */
uint64_t dvskit_grid_t0_us(const DvsGrid *grid);

/**
 * Window length in microseconds; 0 for a null handle.
 */
uint64_t dvskit_grid_duration_us(const DvsGrid *grid);

/**
 * Polarity sum at pixel `(x, y)`; 0 for a null handle or out-of-range
 * coordinates.
 */
int32_t dvskit_grid_sum(const DvsGrid *grid, uint16_t x, uint16_t y);

/**
 * Renders the grid through the sigmoid tone map into `pixels`: row-major,
 * `width * height` bytes, zero sum maps to 128.
 */
DvsStatus dvskit_grid_render_sigmoid(const DvsGrid *grid, uint8_t *pixels, size_t capacity);

/**
 * Renders the grid as a binary activity mask into `pixels`: row-major,
 * `width * height` bytes, 255 where any event landed and 0 elsewhere.
 */
DvsStatus dvskit_grid_render_binary(const DvsGrid *grid, uint8_t *pixels, size_t capacity);

/**
 * Runs connected-component blob detection on the grid.
 *
 * A pixel is active when the magnitude of its polarity sum reaches
 * `activity_threshold`; components of at least `min_area` active pixels
 * become boxes with confidence = pixel count / rectangle area. On success
 * `*out_boxes` receives an array of `*out_count` boxes (null when the count
 * is zero) that the caller must release with [`dvskit_boxes_free`].
 */
DvsStatus dvskit_grid_detect_blobs(const DvsGrid *grid,
                                   size_t min_area,
                                   bool eight_connectivity,
                                   int32_t activity_threshold,
                                   DvsBox **out_boxes,
                                   size_t *out_count);

/**
 * Releases a box array returned by [`dvskit_grid_detect_blobs`]. Null is
 * ignored; `count` must be the value reported with the pointer.
 */
void dvskit_boxes_free(DvsBox *boxes, size_t count);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DVSKIT_H */
