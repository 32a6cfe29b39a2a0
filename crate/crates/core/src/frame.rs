//! Event binning and frame rendering.
//!
//! Events are accumulated into per-pixel polarity sums over half-open time
//! windows `[t0, t0+duration)`, then rendered to 8-bit frames either through
//! the sigmoid mapping `255 / (1 + e^(-x/2))` or the binary mapping
//! `255 if x != 0 else 0`. The default window of 10 ms tiles one second into
//! exactly 100 frames.

use crate::event::EventStream;
use crate::geometry::BoundingBox;

/// Default binning window: 10 ms, i.e. 100 frames per second.
pub const DEFAULT_WINDOW_US: u64 = 10_000;

/// Per-pixel sum of event polarities over one time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarityGrid {
    pub width: u16,
    pub height: u16,
    /// Window start, microseconds.
    pub t0: u64,
    /// Window length, microseconds; always positive.
    pub duration: u64,
    sums: Vec<i32>,
}

impl PolarityGrid {
    /// Zero-filled grid for the window `[t0, t0+duration)`.
    ///
    /// Panics if `duration == 0`.
    pub fn new(width: u16, height: u16, t0: u64, duration: u64) -> PolarityGrid {
        assert!(duration > 0, "window duration must be positive");
        PolarityGrid {
            width,
            height,
            t0,
            duration,
            sums: vec![0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> i32 {
        self.sums[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn add(&mut self, x: u16, y: u16, delta: i32) {
        self.sums[y as usize * self.width as usize + x as usize] += delta;
    }

    /// Raw sums in row-major order.
    pub fn sums(&self) -> &[i32] {
        &self.sums
    }

    /// Sum of |x| over all pixels: the number of events counted in the window
    /// when no pixel saw both polarities, and a lower bound otherwise.
    pub fn total_abs(&self) -> u64 {
        self.sums.iter().map(|&v| v.unsigned_abs() as u64).sum()
    }
}

/// 8-bit single-channel image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    pub width: u16,
    pub height: u16,
    values: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: u16, height: u16) -> GrayFrame {
        GrayFrame {
            width,
            height,
            values: vec![0; width as usize * height as usize],
        }
    }

    pub fn from_values(width: u16, height: u16, values: Vec<u8>) -> GrayFrame {
        assert_eq!(
            values.len(),
            width as usize * height as usize,
            "pixel count mismatch"
        );
        GrayFrame {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn get(&self, x: u16, y: u16) -> u8 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u16, y: u16, value: u8) {
        self.values[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }
}

/// Sums event polarities per pixel over `[t0, t0+duration)`.
///
/// The stream must satisfy its ordering invariant: the implementation locates
/// the window by binary search on timestamps and then accumulates without
/// further time checks. Windows containing no events yield a zero grid.
///
/// Panics if `duration == 0`.
pub fn accumulate_window(stream: &EventStream, t0: u64, duration: u64) -> PolarityGrid {
    let mut grid = PolarityGrid::new(stream.width, stream.height, t0, duration);
    let end = t0.saturating_add(duration);
    let lo = stream.events.partition_point(|e| e.t_us < t0);
    let hi = stream.events.partition_point(|e| e.t_us < end);
    let width = stream.width as usize;
    for ev in &stream.events[lo..hi] {
        grid.sums[ev.y as usize * width + ev.x as usize] += ev.polarity.sign() as i32;
    }
    grid
}

/// Accumulates `count` consecutive windows `[anchor + i*duration,
/// anchor + (i+1)*duration)` in one pass over the stream.
///
/// Panics if `duration == 0`.
pub fn window_sequence(
    stream: &EventStream,
    anchor: u64,
    duration: u64,
    count: usize,
) -> Vec<PolarityGrid> {
    assert!(duration > 0, "window duration must be positive");
    let mut grids: Vec<PolarityGrid> = (0..count)
        .map(|i| {
            PolarityGrid::new(
                stream.width,
                stream.height,
                anchor.saturating_add(i as u64 * duration),
                duration,
            )
        })
        .collect();
    if count == 0 {
        return grids;
    }
    let end = anchor.saturating_add(count as u64 * duration);
    let width = stream.width as usize;
    for ev in &stream.events {
        if ev.t_us < anchor || ev.t_us >= end {
            continue;
        }
        let idx = ((ev.t_us - anchor) / duration) as usize;
        grids[idx].sums[ev.y as usize * width + ev.x as usize] += ev.polarity.sign() as i32;
    }
    grids
}

/// Sigmoid value of one polarity sum: `255 / (1 + e^(-x/2))`, rounded half
/// away from zero. An empty window (x = 0) maps to 128.
#[inline]
pub fn sigmoid_value(x: i32) -> u8 {
    let sigma = 255.0 / (1.0 + (-(x as f64) / 2.0).exp());
    sigma.round().clamp(0.0, 255.0) as u8
}

/// Renders the sigmoid representation of a grid.
pub fn sigmoid_render(grid: &PolarityGrid) -> GrayFrame {
    GrayFrame {
        width: grid.width,
        height: grid.height,
        values: grid.sums.iter().map(|&x| sigmoid_value(x)).collect(),
    }
}

/// Renders the binary representation: 255 where the polarity sum is nonzero,
/// 0 elsewhere. Pixels whose events cancelled out exactly stay black.
pub fn binary_render(grid: &PolarityGrid) -> GrayFrame {
    GrayFrame {
        width: grid.width,
        height: grid.height,
        values: grid
            .sums
            .iter()
            .map(|&x| if x != 0 { 255u8 } else { 0u8 })
            .collect(),
    }
}

/// Debug rendering of raw sums as `x + 128`, clamped to [0, 255].
///
/// Lossy for |x| > 127; intended for eyeballing grids, not for round trips.
pub fn debug_render(grid: &PolarityGrid) -> GrayFrame {
    GrayFrame {
        width: grid.width,
        height: grid.height,
        values: grid
            .sums
            .iter()
            .map(|&x| (x + 128).clamp(0, 255) as u8)
            .collect(),
    }
}

/// Burns 1-pixel box borders into a frame at the given intensity, skipping
/// boxes below `min_confidence`. Border segments outside the frame are
/// clipped; boxes entirely outside leave the frame untouched.
pub fn render_overlay(
    frame: &mut GrayFrame,
    boxes: &[BoundingBox],
    min_confidence: f64,
    value: u8,
) {
    let (w, h) = (frame.width as i64, frame.height as i64);
    for b in boxes {
        if b.confidence < min_confidence {
            continue;
        }
        let xs = b.x0.round() as i64;
        let xe = b.x1.round() as i64;
        let ys = b.y0.round() as i64;
        let ye = b.y1.round() as i64;
        let mut put = |x: i64, y: i64| {
            if x >= 0 && x < w && y >= 0 && y < h {
                frame.set(x as u16, y as u16, value);
            }
        };
        for x in xs..xe {
            put(x, ys);
            put(x, ye - 1);
        }
        for y in ys + 1..ye - 1 {
            put(xs, y);
            put(xe - 1, y);
        }
    }
}
