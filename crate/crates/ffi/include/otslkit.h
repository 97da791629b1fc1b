#ifndef OTSLKIT_H
#define OTSLKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>

typedef enum OtslkitStatus {
  OTSLKIT_STATUS_OK = 0,
  OTSLKIT_STATUS_NULL_POINTER = 1,
  OTSLKIT_STATUS_INVALID_UTF8 = 2,
  OTSLKIT_STATUS_UNKNOWN_TOKEN = 3,
  OTSLKIT_STATUS_INVALID_STRUCTURE = 4,
  OTSLKIT_STATUS_BAD_GRID = 5,
  OTSLKIT_STATUS_MALFORMED_HTML = 6,
  OTSLKIT_STATUS_INCONSISTENT_GEOMETRY = 7,
  OTSLKIT_STATUS_INVALID_ARGUMENT = 8,
  OTSLKIT_STATUS_PANIC = 99,
} OtslkitStatus;

/*
 Opaque handle to a valid OTSL matrix.
 */
typedef struct OtslkitMatrix OtslkitMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *otslkit_last_error_message(void);

/*
 Parses a valid OTSL sequence; the grid width comes from the first N.

 # Safety
 `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum OtslkitStatus otslkit_matrix_parse(const char *text, struct OtslkitMatrix **out);

/*
 Repairs a raw predicted sequence onto an `rows` x `cols` grid.
 `max_len` caps the raw token count (0 for no cap). The number of repair
 actions is written to `out_repairs` when it is not NULL.

 # Safety
 `text` must be a NUL-terminated string, `out` writable, and
 `out_repairs` either NULL or writable.
 */
enum OtslkitStatus otslkit_align_text(const char *text,
                                      size_t rows,
                                      size_t cols,
                                      size_t max_len,
                                      struct OtslkitMatrix **out,
                                      size_t *out_repairs);

/*
 Converts HTML table markup to a matrix.

 # Safety
 `html` must be a NUL-terminated string and `out` a writable pointer.
 */
enum OtslkitStatus otslkit_html_to_matrix(const char *html, struct OtslkitMatrix **out);

/*
 Number of table rows, or 0 for a NULL handle.

 # Safety
 `m` must be NULL or a live handle.
 */
size_t otslkit_matrix_rows(const struct OtslkitMatrix *m);

/*
 Number of table columns (excluding the N column), or 0 for NULL.

 # Safety
 `m` must be NULL or a live handle.
 */
size_t otslkit_matrix_cols(const struct OtslkitMatrix *m);

/*
 True when the table has any merged cell.

 # Safety
 `m` must be NULL or a live handle.
 */
bool otslkit_matrix_is_complex(const struct OtslkitMatrix *m);

/*
 Serializes the matrix as OTSL text.

 # Safety
 `m` must be a live handle and `out` a writable pointer.
 */
enum OtslkitStatus otslkit_matrix_to_otsl(const struct OtslkitMatrix *m, char **out);

/*
 Renders the matrix as structure-only HTML tags.

 # Safety
 `m` must be a live handle and `out` a writable pointer.
 */
enum OtslkitStatus otslkit_matrix_to_html(const struct OtslkitMatrix *m, char **out);

/*
 TEDS-S between two structures, each given as HTML or OTSL text.

 # Safety
 `gt` and `pred` must be NUL-terminated strings and `out` writable.
 */
enum OtslkitStatus otslkit_teds_s(const char *gt, const char *pred, double *out);

/*
 Row and column counts from a JSON array of detections. A negative
 `column_nms_iou` leaves column suppression off.

 # Safety
 `json` must be a NUL-terminated string; `out_rows` and `out_cols` writable.
 */
enum OtslkitStatus otslkit_estimate_grid_json(const char *json,
                                              double score_threshold,
                                              double row_nms_iou,
                                              double column_nms_iou,
                                              size_t *out_rows,
                                              size_t *out_cols);

/*
 Releases a matrix handle. NULL is ignored.

 # Safety
 `m` must be NULL or a handle from this library not yet freed.
 */
void otslkit_matrix_free(struct OtslkitMatrix *m);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must be NULL or a string from this library not yet freed.
 */
void otslkit_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OTSLKIT_H */
