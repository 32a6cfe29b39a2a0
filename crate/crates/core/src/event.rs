//! Core event types: single DVS events and ordered event streams.
//!
//! An event records a log-luminance change at one pixel: where, when, and in
//! which direction. Streams carry the sensor geometry and keep events in
//! non-decreasing timestamp order.

use std::fmt;

/// Default sensor width in pixels (DAVIS346 geometry).
pub const DEFAULT_SENSOR_WIDTH: u16 = 346;
/// Default sensor height in pixels (DAVIS346 geometry).
pub const DEFAULT_SENSOR_HEIGHT: u16 = 260;

/// Direction of the luminance change that triggered an event.
///
/// Serialized as +1 (brightening) or -1 (darkening); zero is not a polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Polarity {
    /// Luminance increased.
    On = 1,
    /// Luminance decreased.
    Off = -1,
}

impl Polarity {
    /// Signed value of the polarity, +1 or -1.
    #[inline]
    pub fn sign(self) -> i8 {
        self as i8
    }

    /// Maps +1/-1 to a polarity; anything else (including 0) is rejected.
    #[inline]
    pub fn from_sign(value: i8) -> Option<Polarity> {
        match value {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sign())
    }
}

/// One sensor spike: pixel location, microsecond timestamp, polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t_us: u64,
    /// Pixel column, 0-based.
    pub x: u16,
    /// Pixel row, 0-based.
    pub y: u16,
    /// Direction of the luminance change.
    pub polarity: Polarity,
}

/// An ordered sequence of events plus the geometry of the emitting sensor.
///
/// Fields are public so that codecs, tests and [`validate`](EventStream::validate)
/// can inspect or construct arbitrary streams; well-formedness (timestamps
/// non-decreasing, coordinates in bounds, positive geometry) is checked by the
/// parsers and by `validate`, not by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Empty stream with the given sensor geometry.
    pub fn new(width: u16, height: u16) -> EventStream {
        EventStream {
            width,
            height,
            events: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Checks every stream invariant and reports the first violation of each
    /// kind, with the offending event index.
    ///
    /// Violations are data, not errors: the report is always produced.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.width == 0 || self.height == 0 {
            violations.push(Violation {
                index: 0,
                kind: ViolationKind::ZeroDimension {
                    width: self.width,
                    height: self.height,
                },
            });
        }
        let mut seen_order = false;
        let mut seen_x = false;
        let mut seen_y = false;
        let mut prev_t = 0u64;
        for (index, ev) in self.events.iter().enumerate() {
            if !seen_order && index > 0 && ev.t_us < prev_t {
                violations.push(Violation {
                    index,
                    kind: ViolationKind::DecreasingTimestamp {
                        prev: prev_t,
                        curr: ev.t_us,
                    },
                });
                seen_order = true;
            }
            if !seen_x && ev.x >= self.width {
                violations.push(Violation {
                    index,
                    kind: ViolationKind::XOutOfBounds {
                        x: ev.x,
                        width: self.width,
                    },
                });
                seen_x = true;
            }
            if !seen_y && ev.y >= self.height {
                violations.push(Violation {
                    index,
                    kind: ViolationKind::YOutOfBounds {
                        y: ev.y,
                        height: self.height,
                    },
                });
                seen_y = true;
            }
            prev_t = ev.t_us;
        }
        ValidationReport { violations }
    }

    /// True when [`validate`](Self::validate) reports no violations.
    pub fn is_valid(&self) -> bool {
        self.validate().violations.is_empty()
    }
}

/// A single invariant violation found by [`EventStream::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Index of the first event exhibiting the violation.
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DecreasingTimestamp { prev: u64, curr: u64 },
    XOutOfBounds { x: u16, width: u16 },
    YOutOfBounds { y: u16, height: u16 },
    ZeroDimension { width: u16, height: u16 },
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::DecreasingTimestamp { prev, curr } => {
                write!(f, "timestamp {curr} decreases below previous {prev}")
            }
            ViolationKind::XOutOfBounds { x, width } => {
                write!(f, "x={x} outside sensor width {width}")
            }
            ViolationKind::YOutOfBounds { y, height } => {
                write!(f, "y={y} outside sensor height {height}")
            }
            ViolationKind::ZeroDimension { width, height } => {
                write!(f, "sensor geometry {width}x{height} has a zero dimension")
            }
        }
    }
}

/// Outcome of [`EventStream::validate`]: empty iff all invariants hold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(t_us: u64, x: u16, y: u16, p: i8) -> Event {
        Event {
            t_us,
            x,
            y,
            polarity: Polarity::from_sign(p).unwrap(),
        }
    }

    #[test]
    fn polarity_rejects_zero() {
        assert_eq!(Polarity::from_sign(1), Some(Polarity::On));
        assert_eq!(Polarity::from_sign(-1), Some(Polarity::Off));
        assert_eq!(Polarity::from_sign(0), None);
        assert_eq!(Polarity::from_sign(2), None);
    }

    #[test]
    fn valid_stream_has_empty_report() {
        let stream = EventStream {
            width: 4,
            height: 3,
            events: vec![ev(1, 0, 0, 1), ev(1, 3, 2, -1), ev(5, 1, 1, 1)],
        };
        assert!(stream.validate().is_ok());
    }

    #[test]
    fn ordering_violation_reported_at_index() {
        let stream = EventStream {
            width: 4,
            height: 3,
            events: vec![ev(5, 0, 0, 1), ev(3, 0, 0, 1)],
        };
        let report = stream.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].index, 1);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::DecreasingTimestamp { prev: 5, curr: 3 }
        );
    }

    #[test]
    fn bounds_violation_at_exact_width() {
        let stream = EventStream {
            width: 4,
            height: 3,
            events: vec![ev(1, 4, 0, 1)],
        };
        let report = stream.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].index, 0);
        assert_eq!(
            report.violations[0].kind,
            ViolationKind::XOutOfBounds { x: 4, width: 4 }
        );
    }

    #[test]
    fn equal_timestamps_are_legal() {
        let stream = EventStream {
            width: 2,
            height: 2,
            events: vec![ev(7, 0, 0, 1), ev(7, 1, 1, -1)],
        };
        assert!(stream.is_valid());
    }

    #[test]
    fn zero_dimension_reported() {
        let stream = EventStream::new(0, 10);
        assert!(!stream.is_valid());
    }
}
