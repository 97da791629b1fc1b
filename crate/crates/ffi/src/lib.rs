//! C ABI for otslkit.
//!
//! Every fallible call returns an [`OtslkitStatus`]; on failure a message is
//! available from [`otslkit_last_error_message`] on the same thread. Matrices
//! are opaque handles released with [`otslkit_matrix_free`]. Strings returned
//! through out-parameters are released with [`otslkit_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use otslkit::align::{align_text_with, AlignOptions};
use otslkit::convert::{filter_structure, html_to_otsl, otsl_to_html, HtmlTagSequence};
use otslkit::grid::{estimate_grid, parse_detections, GridConfig};
use otslkit::otsl::{parse, OtslMatrix};
use otslkit::teds::teds_s;
use otslkit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtslkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    UnknownToken = 3,
    InvalidStructure = 4,
    BadGrid = 5,
    MalformedHtml = 6,
    InconsistentGeometry = 7,
    InvalidArgument = 8,
    Panic = 99,
}

/// Opaque handle to a valid OTSL matrix.
pub struct OtslkitMatrix {
    inner: OtslMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> OtslkitStatus {
    match e {
        Error::UnknownToken { .. } => OtslkitStatus::UnknownToken,
        Error::InvalidStructure(_) | Error::LengthMismatch { .. } => {
            OtslkitStatus::InvalidStructure
        }
        Error::BadGrid { .. } => OtslkitStatus::BadGrid,
        Error::MalformedHtml(_) => OtslkitStatus::MalformedHtml,
        Error::InconsistentGeometry(_) => OtslkitStatus::InconsistentGeometry,
        _ => OtslkitStatus::InvalidArgument,
    }
}

type FfiResult<T> = Result<T, OtslkitStatus>;

impl From<Error> for OtslkitStatus {
    fn from(e: Error) -> Self {
        set_error(e.to_string());
        status_of(&e)
    }
}

/// Runs `f`, turning errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> OtslkitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OtslkitStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            OtslkitStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> FfiResult<&'a str> {
    if p.is_null() {
        set_error("null string argument");
        return Err(OtslkitStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        OtslkitStatus::InvalidUtf8
    })
}

unsafe fn matrix<'a>(m: *const OtslkitMatrix) -> FfiResult<&'a OtslMatrix> {
    m.as_ref().map(|m| &m.inner).ok_or_else(|| {
        set_error("null matrix handle");
        OtslkitStatus::NullPointer
    })
}

unsafe fn put<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(OtslkitStatus::NullPointer);
    }
    out.write(value);
    Ok(())
}

unsafe fn put_matrix(out: *mut *mut OtslkitMatrix, m: OtslMatrix) -> FfiResult<()> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(OtslkitStatus::NullPointer);
    }
    out.write(Box::into_raw(Box::new(OtslkitMatrix { inner: m })));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> FfiResult<()> {
    let c = CString::new(s).map_err(|_| {
        set_error("output contains a NUL byte");
        OtslkitStatus::InvalidArgument
    })?;
    put(out, c.into_raw())
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn otslkit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a valid OTSL sequence; the grid width comes from the first N.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_parse(
    text: *const c_char,
    out: *mut *mut OtslkitMatrix,
) -> OtslkitStatus {
    guard(|| {
        let seq = parse(read_str(text)?)?;
        put_matrix(out, OtslMatrix::infer(&seq)?)
    })
}

/// Repairs a raw predicted sequence onto an `rows` x `cols` grid.
/// `max_len` caps the raw token count (0 for no cap). The number of repair
/// actions is written to `out_repairs` when it is not NULL.
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` writable, and
/// `out_repairs` either NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn otslkit_align_text(
    text: *const c_char,
    rows: usize,
    cols: usize,
    max_len: usize,
    out: *mut *mut OtslkitMatrix,
    out_repairs: *mut usize,
) -> OtslkitStatus {
    guard(|| {
        let opts = AlignOptions {
            max_seq_len: (max_len > 0).then_some(max_len),
            ..AlignOptions::default()
        };
        let (m, log) = align_text_with(read_str(text)?, rows, cols, &opts)?;
        if !out_repairs.is_null() {
            out_repairs.write(log.len());
        }
        put_matrix(out, m)
    })
}

/// Converts HTML table markup to a matrix.
///
/// # Safety
/// `html` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otslkit_html_to_matrix(
    html: *const c_char,
    out: *mut *mut OtslkitMatrix,
) -> OtslkitStatus {
    guard(|| {
        let tags = filter_structure(read_str(html)?)?;
        put_matrix(out, html_to_otsl(&tags)?)
    })
}

/// Number of table rows, or 0 for a NULL handle.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_rows(m: *const OtslkitMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// Number of table columns (excluding the N column), or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_cols(m: *const OtslkitMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// True when the table has any merged cell.
///
/// # Safety
/// `m` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_is_complex(m: *const OtslkitMatrix) -> bool {
    m.as_ref().is_some_and(|m| m.inner.is_complex())
}

/// Serializes the matrix as OTSL text.
///
/// # Safety
/// `m` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_to_otsl(
    m: *const OtslkitMatrix,
    out: *mut *mut c_char,
) -> OtslkitStatus {
    guard(|| put_string(out, matrix(m)?.serialize()))
}

/// Renders the matrix as structure-only HTML tags.
///
/// # Safety
/// `m` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_to_html(
    m: *const OtslkitMatrix,
    out: *mut *mut c_char,
) -> OtslkitStatus {
    guard(|| put_string(out, otsl_to_html(matrix(m)?).to_string()))
}

fn structure(text: &str) -> FfiResult<HtmlTagSequence> {
    if text.trim_start().starts_with('<') {
        Ok(filter_structure(text)?)
    } else {
        Ok(otsl_to_html(&OtslMatrix::infer(&parse(text)?)?))
    }
}

/// TEDS-S between two structures, each given as HTML or OTSL text.
///
/// # Safety
/// `gt` and `pred` must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn otslkit_teds_s(
    gt: *const c_char,
    pred: *const c_char,
    out: *mut f64,
) -> OtslkitStatus {
    guard(|| {
        let gt = structure(read_str(gt)?)?;
        let pred = structure(read_str(pred)?)?;
        put(out, teds_s(&gt, &pred)?)
    })
}

/// Row and column counts from a JSON array of detections. A negative
/// `column_nms_iou` leaves column suppression off.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_rows` and `out_cols` writable.
#[no_mangle]
pub unsafe extern "C" fn otslkit_estimate_grid_json(
    json: *const c_char,
    score_threshold: f64,
    row_nms_iou: f64,
    column_nms_iou: f64,
    out_rows: *mut usize,
    out_cols: *mut usize,
) -> OtslkitStatus {
    guard(|| {
        let dets = parse_detections(read_str(json)?)?;
        let unit = 0.0..=1.0;
        if !unit.contains(&score_threshold) || !unit.contains(&row_nms_iou) || column_nms_iou > 1.0
        {
            set_error("thresholds must lie in [0, 1]");
            return Err(OtslkitStatus::InvalidArgument);
        }
        let config = GridConfig {
            score_threshold,
            row_nms_iou,
            column_nms_iou: (column_nms_iou >= 0.0).then_some(column_nms_iou),
        };
        let g = estimate_grid(&dets, &config);
        put(out_rows, g.rows)?;
        put(out_cols, g.cols)
    })
}

/// Releases a matrix handle. NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otslkit_matrix_free(m: *mut OtslkitMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn otslkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
