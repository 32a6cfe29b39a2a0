//! Event-camera data pipeline toolkit.
//!
//! The crate covers the ground between a raw stream of change-detection
//! events and a trainable object-detection dataset:
//!
//! * [`event`] / [`codec`]: the in-memory event model plus a compact binary
//!   container and a canonical CSV form, both round-trip safe.
//! * [`sim`]: a log-intensity threshold simulator that turns conventional
//!   frame sequences into event streams.
//! * [`frame`]: fixed-window polarity binning and grayscale renderings.
//! * [`geometry`]: box arithmetic (IoU, NMS, letterboxing).
//! * [`pseudolabel`]: confidence filtering, frame/window pairing, label
//!   export, and deterministic dataset splits.
//! * [`detections`] / [`eval`]: detection interchange, greedy matching,
//!   average precision, detection-fraction set analysis, and fusion.
//! * [`blob`]: a connected-component baseline detector on binned frames.
//! * [`demo`]: a self-contained synthetic end-to-end scenario.

pub mod blob;
pub mod codec;
pub mod config;
pub mod demo;
pub mod detections;
pub mod eval;
pub mod event;
pub mod frame;
pub mod geometry;
pub mod pgm;
pub mod pseudolabel;
pub mod sim;

pub use codec::{parse_events_binary, parse_events_csv, write_events_binary, write_events_csv};
pub use event::{Event, EventStream, Polarity};
pub use frame::{accumulate_window, binary_render, sigmoid_render, GrayFrame, PolarityGrid};
pub use geometry::{iou, nms, BoundingBox, LetterboxTransform};
