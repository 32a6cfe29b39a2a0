//! C ABI over the dvskit core: opaque handles, status codes, and a
//! thread-local error message.
//!
//! Conventions:
//! - Every fallible function returns [`DvsStatus`]; `DVS_STATUS_OK` is zero.
//! - On failure a human-readable message is stored for
//!   [`dvskit_last_error_message`] and out-parameters are left untouched.
//! - Handles are created by this library and must be released exactly once
//!   with the matching `_free` function. Getters accept null handles and
//!   read them as empty objects.
//! - Handles are not internally synchronized; guard a handle with a lock if
//!   several threads share it.
//! - Panics never unwind across the boundary: they are caught and surfaced
//!   as `DVS_STATUS_PANIC`.

#![deny(unsafe_op_in_unsafe_fn)]
// Pointer contracts are documented on each function and flow into the C
// header; rustdoc Safety sections would only duplicate them there.
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dvskit::blob::{detect_blobs, BlobParams, Connectivity};
use dvskit::{
    accumulate_window, binary_render, parse_events_binary, parse_events_csv, sigmoid_render,
    write_events_binary, Event, EventStream, GrayFrame, Polarity, PolarityGrid,
};

/// Result code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument value was rejected; see the error message.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    Utf8 = 3,
    /// A file could not be read or written.
    Io = 4,
    /// Input bytes or text failed to decode.
    Parse = 5,
    /// An internal invariant failure was caught at the boundary.
    Panic = 6,
}

/// Opaque event stream. Create with one of the `dvskit_stream_*`
/// constructors, release with [`dvskit_stream_free`].
pub struct DvsStream {
    inner: EventStream,
}

/// Opaque per-pixel polarity-sum grid. Created by
/// [`dvskit_stream_accumulate`], released with [`dvskit_grid_free`].
pub struct DvsGrid {
    inner: PolarityGrid,
}

/// One sensor event. `polarity` is +1 (brighter) or -1 (darker).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DvsEvent {
    /// Timestamp in microseconds.
    pub t_us: u64,
    /// Pixel column, 0-based.
    pub x: u16,
    /// Pixel row, 0-based.
    pub y: u16,
    pub polarity: i8,
}

/// Axis-aligned detection box in pixel coordinates, `x0 < x1`, `y0 < y1`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvsBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: DvsStatus, message: impl Display) -> DvsStatus {
    let text = message.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("interior NULs stripped");
    });
    status
}

fn guarded(body: impl FnOnce() -> DvsStatus) -> DvsStatus {
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| (*s).to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unidentified panic".to_string());
            fail(DvsStatus::Panic, message)
        }
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return fail(
                DvsStatus::NullArgument,
                concat!(stringify!($ptr), " is null"),
            );
        }
    };
}

unsafe fn give<T>(out: *mut *mut T, value: T) {
    unsafe { ptr::write(out, Box::into_raw(Box::new(value))) }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, DvsStatus> {
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(DvsStatus::Utf8, format_args!("{name} is not valid UTF-8")))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn dvskit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on the calling thread, empty
/// if nothing failed yet. The pointer stays valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn dvskit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Decodes an EVT1 byte buffer into a new stream handle.
///
/// `bytes` may be null only when `len` is zero.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_parse_evt1(
    bytes: *const u8,
    len: usize,
    out: *mut *mut DvsStream,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out);
        if len > 0 {
            nonnull!(bytes);
        }
        let data: &[u8] = if len == 0 {
            &[]
        } else {
            unsafe { slice::from_raw_parts(bytes, len) }
        };
        match parse_events_binary(data) {
            Ok(inner) => {
                unsafe { give(out, DvsStream { inner }) };
                DvsStatus::Ok
            }
            Err(err) => fail(DvsStatus::Parse, err),
        }
    })
}

/// Reads and decodes an EVT1 file.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_read_evt1(
    path: *const c_char,
    out: *mut *mut DvsStream,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out);
        nonnull!(path);
        let path = match unsafe { cstr_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(err) => return fail(DvsStatus::Io, format_args!("{path}: {err}")),
        };
        match parse_events_binary(&bytes) {
            Ok(inner) => {
                unsafe { give(out, DvsStream { inner }) };
                DvsStatus::Ok
            }
            Err(err) => fail(DvsStatus::Parse, format_args!("{path}: {err}")),
        }
    })
}

/// Parses CSV event text (`t_us,x,y,p` header) for a sensor of the given
/// geometry.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_parse_csv(
    text: *const c_char,
    width: u16,
    height: u16,
    out: *mut *mut DvsStream,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out);
        nonnull!(text);
        let text = match unsafe { cstr_arg(text, "text") } {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_events_csv(text, width, height) {
            Ok(inner) => {
                unsafe { give(out, DvsStream { inner }) };
                DvsStatus::Ok
            }
            Err(err) => fail(DvsStatus::Parse, err),
        }
    })
}

/// Builds a stream from caller-supplied events, enforcing the stream
/// invariants: nonzero sensor dimensions, coordinates inside
/// `width` x `height`, non-decreasing timestamps, polarity +1 or -1.
///
/// `events` may be null only when `count` is zero.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_from_events(
    events: *const DvsEvent,
    count: usize,
    width: u16,
    height: u16,
    out: *mut *mut DvsStream,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out);
        if count > 0 {
            nonnull!(events);
        }
        let raw: &[DvsEvent] = if count == 0 {
            &[]
        } else {
            unsafe { slice::from_raw_parts(events, count) }
        };
        let mut inner = EventStream::new(width, height);
        inner.events.reserve(raw.len());
        for (index, ev) in raw.iter().enumerate() {
            let Some(polarity) = Polarity::from_sign(ev.polarity) else {
                return fail(
                    DvsStatus::InvalidArgument,
                    format_args!("event {index}: polarity {} must be 1 or -1", ev.polarity),
                );
            };
            inner.events.push(Event {
                t_us: ev.t_us,
                x: ev.x,
                y: ev.y,
                polarity,
            });
        }
        if let Some(first) = inner.validate().violations.first() {
            return fail(
                DvsStatus::InvalidArgument,
                format_args!("event {}: {}", first.index, first.kind),
            );
        }
        unsafe { give(out, DvsStream { inner }) };
        DvsStatus::Ok
    })
}

/// Encodes the stream as EVT1 and writes it to `path`.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_write_evt1(
    stream: *const DvsStream,
    path: *const c_char,
) -> DvsStatus {
    guarded(|| {
        nonnull!(stream);
        nonnull!(path);
        let path = match unsafe { cstr_arg(path, "path") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let bytes = write_events_binary(unsafe { &(*stream).inner });
        match std::fs::write(path, bytes) {
            Ok(()) => DvsStatus::Ok,
            Err(err) => fail(DvsStatus::Io, format_args!("{path}: {err}")),
        }
    })
}

/// Releases a stream handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_free(stream: *mut DvsStream) {
    if !stream.is_null() {
        drop(unsafe { Box::from_raw(stream) });
    }
}

/// Number of events in the stream; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_len(stream: *const DvsStream) -> usize {
    unsafe { stream.as_ref() }.map_or(0, |s| s.inner.len())
}

/// Sensor width in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_width(stream: *const DvsStream) -> u16 {
    unsafe { stream.as_ref() }.map_or(0, |s| s.inner.width)
}

/// Sensor height in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_height(stream: *const DvsStream) -> u16 {
    unsafe { stream.as_ref() }.map_or(0, |s| s.inner.height)
}

/// Copies up to `capacity` events in stream order into `buffer` and returns
/// the number copied. A null handle or buffer copies nothing. Call
/// [`dvskit_stream_len`] first to size the buffer.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_copy_events(
    stream: *const DvsStream,
    buffer: *mut DvsEvent,
    capacity: usize,
) -> usize {
    let Some(stream) = (unsafe { stream.as_ref() }) else {
        return 0;
    };
    if buffer.is_null() {
        return 0;
    }
    let n = stream.inner.len().min(capacity);
    let dst = unsafe { slice::from_raw_parts_mut(buffer, n) };
    for (slot, ev) in dst.iter_mut().zip(&stream.inner.events) {
        *slot = DvsEvent {
            t_us: ev.t_us,
            x: ev.x,
            y: ev.y,
            polarity: ev.polarity.sign(),
        };
    }
    n
}

/// Sums event polarities per pixel over `[t0_us, t0_us + duration_us)` and
/// returns the grid as a new handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_stream_accumulate(
    stream: *const DvsStream,
    t0_us: u64,
    duration_us: u64,
    out: *mut *mut DvsGrid,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out);
        nonnull!(stream);
        if duration_us == 0 {
            return fail(
                DvsStatus::InvalidArgument,
                "window duration must be positive",
            );
        }
        let inner = accumulate_window(unsafe { &(*stream).inner }, t0_us, duration_us);
        unsafe { give(out, DvsGrid { inner }) };
        DvsStatus::Ok
    })
}

/// Releases a grid handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_free(grid: *mut DvsGrid) {
    if !grid.is_null() {
        drop(unsafe { Box::from_raw(grid) });
    }
}

/// Grid width in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_width(grid: *const DvsGrid) -> u16 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.width)
}

/// Grid height in pixels; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_height(grid: *const DvsGrid) -> u16 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.height)
}

/// Window start in microseconds; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_t0_us(grid: *const DvsGrid) -> u64 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.t0)
}

/// Window length in microseconds; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_duration_us(grid: *const DvsGrid) -> u64 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.duration)
}

/// Polarity sum at pixel `(x, y)`; 0 for a null handle or out-of-range
/// coordinates.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_sum(grid: *const DvsGrid, x: u16, y: u16) -> i32 {
    match unsafe { grid.as_ref() } {
        Some(g) if x < g.inner.width && y < g.inner.height => g.inner.get(x, y),
        _ => 0,
    }
}

unsafe fn render_into(
    grid: *const DvsGrid,
    pixels: *mut u8,
    capacity: usize,
    render: fn(&PolarityGrid) -> GrayFrame,
) -> DvsStatus {
    guarded(|| {
        nonnull!(grid);
        nonnull!(pixels);
        let grid = unsafe { &(*grid).inner };
        let needed = grid.width as usize * grid.height as usize;
        if capacity < needed {
            return fail(
                DvsStatus::InvalidArgument,
                format_args!("pixel buffer holds {capacity} bytes, frame needs {needed}"),
            );
        }
        let frame = render(grid);
        unsafe { slice::from_raw_parts_mut(pixels, needed) }.copy_from_slice(frame.values());
        DvsStatus::Ok
    })
}

/// Renders the grid through the sigmoid tone map into `pixels`: row-major,
/// `width * height` bytes, zero sum maps to 128.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_render_sigmoid(
    grid: *const DvsGrid,
    pixels: *mut u8,
    capacity: usize,
) -> DvsStatus {
    unsafe { render_into(grid, pixels, capacity, sigmoid_render) }
}

/// Renders the grid as a binary activity mask into `pixels`: row-major,
/// `width * height` bytes, 255 where any event landed and 0 elsewhere.
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_render_binary(
    grid: *const DvsGrid,
    pixels: *mut u8,
    capacity: usize,
) -> DvsStatus {
    unsafe { render_into(grid, pixels, capacity, binary_render) }
}

/// Runs connected-component blob detection on the grid.
///
/// A pixel is active when the magnitude of its polarity sum reaches
/// `activity_threshold`; components of at least `min_area` active pixels
/// become boxes with confidence = pixel count / rectangle area. On success
/// `*out_boxes` receives an array of `*out_count` boxes (null when the count
/// is zero) that the caller must release with [`dvskit_boxes_free`].
#[no_mangle]
pub unsafe extern "C" fn dvskit_grid_detect_blobs(
    grid: *const DvsGrid,
    min_area: usize,
    eight_connectivity: bool,
    activity_threshold: i32,
    out_boxes: *mut *mut DvsBox,
    out_count: *mut usize,
) -> DvsStatus {
    guarded(|| {
        nonnull!(out_boxes);
        nonnull!(out_count);
        nonnull!(grid);
        if min_area == 0 {
            return fail(DvsStatus::InvalidArgument, "min_area must be at least 1");
        }
        if activity_threshold < 1 {
            return fail(
                DvsStatus::InvalidArgument,
                "activity_threshold must be at least 1",
            );
        }
        let params = BlobParams {
            min_area,
            connectivity: if eight_connectivity {
                Connectivity::Eight
            } else {
                Connectivity::Four
            },
            activity_threshold,
        };
        let set = detect_blobs(unsafe { &(*grid).inner }, &params);
        let boxes: Box<[DvsBox]> = set
            .boxes
            .iter()
            .map(|b| DvsBox {
                x0: b.x0,
                y0: b.y0,
                x1: b.x1,
                y1: b.y1,
                confidence: b.confidence,
            })
            .collect();
        let count = boxes.len();
        let handle = if count == 0 {
            ptr::null_mut()
        } else {
            Box::into_raw(boxes) as *mut DvsBox
        };
        unsafe {
            ptr::write(out_count, count);
            ptr::write(out_boxes, handle);
        }
        DvsStatus::Ok
    })
}

/// Releases a box array returned by [`dvskit_grid_detect_blobs`]. Null is
/// ignored; `count` must be the value reported with the pointer.
#[no_mangle]
pub unsafe extern "C" fn dvskit_boxes_free(boxes: *mut DvsBox, count: usize) {
    if !boxes.is_null() {
        drop(unsafe { Box::from_raw(ptr::slice_from_raw_parts_mut(boxes, count)) });
    }
}
