//! Log-threshold event sensor simulation.
//!
//! A change-detection pixel holds a reference log intensity and fires
//! whenever the (linearly interpolated) log intensity crosses the reference
//! by one contrast threshold, advancing the reference one step per event.
//! Because only intensity *ratios* enter the model, the output is invariant
//! under a global multiplicative gain.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::event::{Event, EventStream, Polarity};
use crate::frame::PolarityGrid;
use crate::pgm::{decode_pgm, PgmError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sensor dimensions must be positive, got {width}x{height}")]
    ZeroDimension { width: u16, height: u16 },
    #[error("frame {index} has {got} pixels, expected {expected}")]
    FrameSizeMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error(
        "frame timestamps must be strictly increasing: frame {index} at {t_us} after {prev_t_us}"
    )]
    NonIncreasingTimestamps {
        index: usize,
        prev_t_us: u64,
        t_us: u64,
    },
    #[error("frame {index} pixel {pixel} has non-positive or non-finite intensity {value}")]
    BadIntensity {
        index: usize,
        pixel: usize,
        value: f64,
    },
    #[error("need at least 2 frames to simulate, got {0}")]
    TooFewFrames(usize),
    #[error("contrast threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("frame index: {0}")]
    BadIndex(String),
    #[error(transparent)]
    Pgm(#[from] PgmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Timestamped intensity frames feeding the simulator. Intensities are
/// strictly positive (their logarithm is taken); pixel values loaded from
/// 8-bit images are mapped into (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySequence {
    pub width: u16,
    pub height: u16,
    /// (timestamp µs, row-major intensities), strictly increasing timestamps.
    pub frames: Vec<(u64, Vec<f64>)>,
}

impl IntensitySequence {
    pub fn new(width: u16, height: u16, frames: Vec<(u64, Vec<f64>)>) -> IntensitySequence {
        IntensitySequence {
            width,
            height,
            frames,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.width == 0 || self.height == 0 {
            return Err(SimError::ZeroDimension {
                width: self.width,
                height: self.height,
            });
        }
        let expected = self.width as usize * self.height as usize;
        let mut prev_t: Option<u64> = None;
        for (index, (t_us, pixels)) in self.frames.iter().enumerate() {
            if pixels.len() != expected {
                return Err(SimError::FrameSizeMismatch {
                    index,
                    expected,
                    got: pixels.len(),
                });
            }
            if let Some(prev) = prev_t {
                if *t_us <= prev {
                    return Err(SimError::NonIncreasingTimestamps {
                        index,
                        prev_t_us: prev,
                        t_us: *t_us,
                    });
                }
            }
            prev_t = Some(*t_us);
            for (pixel, &value) in pixels.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(SimError::BadIntensity {
                        index,
                        pixel,
                        value,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    /// Log-intensity step between events; must be positive.
    pub contrast_threshold: f64,
    /// Minimum µs between two events of the same pixel (0 disables).
    pub refractory_us: u64,
}

impl Default for SimParams {
    fn default() -> SimParams {
        SimParams {
            contrast_threshold: 0.15,
            refractory_us: 0,
        }
    }
}

/// Tolerance for "did the trajectory reach the next level": crossings that
/// fall short by less than threshold * 1e-9 still fire, so exact multiples of
/// the threshold produce the full event count despite rounding in `ln`.
const CROSSING_EPS_FACTOR: f64 = 1e-9;

/// Runs the threshold model over an intensity sequence.
///
/// Per pixel, the reference level lives on the grid `k * threshold` (k
/// integer, relative to the first frame's log intensity) and advances one
/// step per emitted event. Between consecutive frames the log intensity
/// moves linearly; each grid crossing emits an event at the interpolated,
/// microsecond-rounded time. Events suppressed by the refractory window
/// still advance the reference. Output is sorted by (t, y, x); same-pixel
/// ties stay in emission order.
pub fn simulate_events(
    seq: &IntensitySequence,
    params: &SimParams,
) -> Result<EventStream, SimError> {
    seq.validate()?;
    if seq.frames.len() < 2 {
        return Err(SimError::TooFewFrames(seq.frames.len()));
    }
    if !(params.contrast_threshold.is_finite() && params.contrast_threshold > 0.0) {
        return Err(SimError::BadThreshold(params.contrast_threshold));
    }
    let threshold = params.contrast_threshold;
    let eps = threshold * CROSSING_EPS_FACTOR;
    let n_pixels = seq.width as usize * seq.height as usize;

    // log intensity relative to frame 0, and the reference grid position
    let mut cur = vec![0.0f64; n_pixels];
    let mut ref_count = vec![0i64; n_pixels];
    let mut last_emit = vec![u64::MAX; n_pixels];
    let mut events: Vec<Event> = Vec::new();

    for pair in seq.frames.windows(2) {
        let (t_a, ref i_a) = pair[0];
        let (t_b, ref i_b) = pair[1];
        let gap = (t_b - t_a) as f64;
        for p in 0..n_pixels {
            let delta = (i_b[p] / i_a[p]).ln();
            if delta == 0.0 {
                continue;
            }
            let seg_start = cur[p];
            let seg_end = seg_start + delta;
            let (step, polarity) = if delta > 0.0 {
                (1i64, Polarity::On)
            } else {
                (-1, Polarity::Off)
            };
            loop {
                let level = (ref_count[p] + step) as f64 * threshold;
                let reached = if step > 0 {
                    level <= seg_end + eps
                } else {
                    level >= seg_end - eps
                };
                if !reached {
                    break;
                }
                let f = ((level - seg_start) / delta).clamp(0.0, 1.0);
                let t = t_a + (f * gap).round() as u64;
                ref_count[p] += step;
                let suppressed = last_emit[p] != u64::MAX
                    && params.refractory_us > 0
                    && t - last_emit[p] < params.refractory_us;
                if !suppressed {
                    last_emit[p] = t;
                    events.push(Event {
                        t_us: t,
                        x: (p % seq.width as usize) as u16,
                        y: (p / seq.width as usize) as u16,
                        polarity,
                    });
                }
            }
            cur[p] = seg_end;
        }
    }

    events.sort_by_key(|e| (e.t_us, e.y, e.x));
    Ok(EventStream {
        width: seq.width,
        height: seq.height,
        events,
    })
}

/// Brute-force polarity accumulation: one pass over every event with an
/// explicit per-event window test. Kept deliberately naive; it is the
/// independent check for the binary-search binning path.
pub fn oracle_polarity_sums(stream: &EventStream, t0: u64, duration: u64) -> PolarityGrid {
    assert!(duration > 0, "window duration must be positive");
    let mut grid = PolarityGrid::new(stream.width, stream.height, t0, duration);
    let end = t0.saturating_add(duration);
    for e in &stream.events {
        if e.t_us >= t0 && e.t_us < end {
            grid.add(e.x, e.y, e.polarity.sign() as i32);
        }
    }
    grid
}

#[derive(Deserialize)]
struct IndexEntry {
    t_us: u64,
    path: String,
}

/// Loads an intensity sequence from a JSON index (array of `{"t_us", "path"}`
/// entries, paths relative to the index file) pointing at P5 images. 8-bit
/// pixel v maps to intensity (v + 1) / 256 so black stays loggable.
pub fn load_intensity_sequence(index_path: &Path) -> Result<IntensitySequence, SimError> {
    let text = fs::read_to_string(index_path)?;
    let entries: Vec<IndexEntry> =
        serde_json::from_str(&text).map_err(|e| SimError::BadIndex(e.to_string()))?;
    if entries.is_empty() {
        return Err(SimError::BadIndex("index lists no frames".into()));
    }
    let base = index_path.parent().unwrap_or(Path::new("."));
    let mut width = 0u16;
    let mut height = 0u16;
    let mut frames = Vec::with_capacity(entries.len());
    for (i, entry) in entries.iter().enumerate() {
        let frame = decode_pgm(&fs::read(base.join(&entry.path))?)?;
        if i == 0 {
            width = frame.width;
            height = frame.height;
        } else if (frame.width, frame.height) != (width, height) {
            return Err(SimError::BadIndex(format!(
                "frame {i} is {}x{}, expected {width}x{height}",
                frame.width, frame.height
            )));
        }
        let intensities = frame
            .values()
            .iter()
            .map(|&v| (v as f64 + 1.0) / 256.0)
            .collect();
        frames.push((entry.t_us, intensities));
    }
    let seq = IntensitySequence::new(width, height, frames);
    seq.validate()?;
    Ok(seq)
}
