//! Self-contained end-to-end scenario: a textured square glides across the
//! sensor, the simulator turns that into events, the events are binned and
//! fed to the blob detector, and the detections are scored against the
//! scripted ground truth. No input files, no randomness.

use serde::Serialize;

use crate::blob::{detect_blobs, BlobParams, BLOB_CLASS};
use crate::detections::DetectionSet;
use crate::eval::{average_precision, fraction_detected, match_detections, MatchParams};
use crate::event::EventStream;
use crate::frame::window_sequence;
use crate::geometry::{iou, BoundingBox};
use crate::sim::{simulate_events, IntensitySequence, SimParams};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoParams {
    pub width: u16,
    pub height: u16,
    pub windows: usize,
    pub window_us: u64,
    /// Square edge length in pixels.
    pub square: u16,
    pub start_x: f64,
    pub start_y: f64,
    pub speed_px_per_window: f64,
    pub background: f64,
    /// Intensity at the square's right (leading) edge; the ramp rises to
    /// `base_intensity + ramp_amplitude` at the left edge. The horizontal
    /// gradient makes interior pixels fire as the square moves, so each
    /// window sees one solid blob instead of two edge strips. Rightward
    /// motion then only ever brightens a pixel: entering columns burst
    /// upward and keep drifting upward, so no column skips a window from
    /// leftover reference slack after its burst.
    pub base_intensity: f64,
    pub ramp_amplitude: f64,
    pub contrast_threshold: f64,
    pub blob: BlobParams,
    pub iou_threshold: f64,
    pub min_height: f64,
}

impl Default for DemoParams {
    fn default() -> DemoParams {
        DemoParams {
            width: 346,
            height: 260,
            windows: 100,
            window_us: 10_000,
            square: 48,
            start_x: 30.0,
            start_y: 106.0,
            speed_px_per_window: 2.0,
            background: 0.2,
            base_intensity: 0.3,
            ramp_amplitude: 0.45,
            contrast_threshold: 0.02,
            blob: BlobParams::default(),
            iou_threshold: 0.5,
            min_height: 25.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub windows: usize,
    pub event_count: usize,
    pub detection_count: usize,
    pub mean_iou: f64,
    /// Share of windows whose best blob reaches the IoU threshold.
    pub windows_at_iou: f64,
    pub ap: f64,
    pub fraction_detected: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutput {
    pub report: DemoReport,
    pub stream: EventStream,
    pub detections: Vec<DetectionSet>,
    pub ground_truth: Vec<DetectionSet>,
}

fn square_left_at(p: &DemoParams, t_us: u64) -> f64 {
    p.start_x + p.speed_px_per_window * (t_us as f64 / p.window_us as f64)
}

/// Intensity frames sampled at every window boundary.
pub fn demo_scene(p: &DemoParams) -> IntensitySequence {
    let mut frames = Vec::with_capacity(p.windows + 1);
    let size = p.square as f64;
    for k in 0..=p.windows {
        let t = k as u64 * p.window_us;
        let left = square_left_at(p, t);
        let mut pixels = vec![p.background; p.width as usize * p.height as usize];
        for y in 0..p.height as usize {
            let yc = y as f64 + 0.5;
            if yc < p.start_y || yc >= p.start_y + size {
                continue;
            }
            for x in 0..p.width as usize {
                let xc = x as f64 + 0.5;
                if xc >= left && xc < left + size {
                    let frac = (xc - left) / size;
                    pixels[y * p.width as usize + x] =
                        p.base_intensity + p.ramp_amplitude * (1.0 - frac);
                }
            }
        }
        frames.push((t, pixels));
    }
    IntensitySequence::new(p.width, p.height, frames)
}

/// One ground-truth box per window: the square at the window's midpoint.
pub fn demo_ground_truth(p: &DemoParams) -> Vec<DetectionSet> {
    (0..p.windows)
        .map(|k| {
            let t0 = k as u64 * p.window_us;
            let left = square_left_at(p, t0 + p.window_us / 2);
            let b = BoundingBox::new(
                left,
                p.start_y,
                left + p.square as f64,
                p.start_y + p.square as f64,
                1.0,
                BLOB_CLASS,
            )
            .expect("scripted box is valid");
            DetectionSet {
                frame_id: format!("{t0:012}"),
                t_us: t0,
                boxes: vec![b],
                source: "script".into(),
            }
        })
        .collect()
}

pub fn run_demo(p: &DemoParams) -> DemoOutput {
    let scene = demo_scene(p);
    let sim = SimParams {
        contrast_threshold: p.contrast_threshold,
        refractory_us: 0,
    };
    let stream = simulate_events(&scene, &sim).expect("scripted scene is valid");

    let grids = window_sequence(&stream, 0, p.window_us, p.windows);
    let detections: Vec<DetectionSet> = grids.iter().map(|g| detect_blobs(g, &p.blob)).collect();
    let ground_truth = demo_ground_truth(p);

    let mut iou_sum = 0.0;
    let mut hit_windows = 0usize;
    for (dets, gts) in detections.iter().zip(&ground_truth) {
        let gt = &gts.boxes[0];
        let best = dets.boxes.iter().map(|b| iou(b, gt)).fold(0.0f64, f64::max);
        iou_sum += best;
        if best >= p.iou_threshold {
            hit_windows += 1;
        }
    }

    let params = MatchParams {
        iou_threshold: p.iou_threshold,
        min_height: p.min_height,
        ignore_filtered_gt: false,
    };
    let matched = match_detections(&detections, &ground_truth, &params);
    let ap = average_precision(&matched).expect("scripted ground truth is non-empty");
    let fraction = fraction_detected(&detections, &ground_truth, p.iou_threshold, p.min_height)
        .expect("scripted ground truth is non-empty");

    let report = DemoReport {
        windows: p.windows,
        event_count: stream.events.len(),
        detection_count: detections.iter().map(|d| d.boxes.len()).sum(),
        mean_iou: iou_sum / p.windows as f64,
        windows_at_iou: hit_windows as f64 / p.windows as f64,
        ap,
        fraction_detected: fraction,
    };
    DemoOutput {
        report,
        stream,
        detections,
        ground_truth,
    }
}
