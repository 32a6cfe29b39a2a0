//! From detector outputs to training data: confidence filtering, APS-frame /
//! event-window pairing, normalized label export, and recording-level
//! train/val/test splits.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detections::DetectionSet;

#[derive(Debug, Error)]
pub enum PseudolabelError {
    #[error(
        "frame timestamps must be strictly increasing: {frame_id:?} at {t_us} after {prev_t_us}"
    )]
    NonIncreasingTimestamps {
        frame_id: String,
        prev_t_us: u64,
        t_us: u64,
    },
    #[error("window duration must be positive")]
    ZeroWindow,
    #[error("frame {frame_id:?} at t=0 has an empty preceding window")]
    EmptyWindow { frame_id: String },
    #[error("pairing references frame {frame_id:?} absent from the detections")]
    MissingFrame { frame_id: String },
    #[error("need at least {need} recordings to fill every split, got {got}")]
    TooFewRecordings { got: usize, need: usize },
    #[error("duplicate recording id {0:?}")]
    DuplicateRecording(String),
    #[error("recording {0:?} has zero duration")]
    ZeroRecordingDuration(String),
    #[error("split ratios must be positive")]
    BadRatios,
    #[error("manifest: {0}")]
    BadManifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Keeps boxes with confidence at or above the threshold ("at least" is
/// inclusive: a 0.5 box survives a 0.5 threshold).
pub fn filter_confidence(dets: &DetectionSet, threshold: f64) -> DetectionSet {
    assert!(
        (0.0..=1.0).contains(&threshold),
        "threshold must be in [0,1]"
    );
    DetectionSet {
        frame_id: dets.frame_id.clone(),
        t_us: dets.t_us,
        boxes: dets
            .boxes
            .iter()
            .filter(|b| b.confidence >= threshold)
            .cloned()
            .collect(),
        source: dets.source.clone(),
    }
}

/// Which side of the APS exposure the event window covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Alignment {
    /// Window [T − Δ, T): the events leading up to the frame.
    Preceding,
    /// Window [T, T + Δ): the events right after it.
    Following,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedWindow {
    pub frame_id: String,
    pub aps_t_us: u64,
    pub window_t0: u64,
    pub window_duration: u64,
}

/// One event window per APS frame; windows may overlap.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FramePairing {
    pub entries: Vec<PairedWindow>,
}

/// Assigns each APS frame its event window. `Preceding` windows that would
/// start before time zero are truncated to [0, T); a frame at T = 0 has no
/// preceding events at all and is an input error.
pub fn pair_frames(
    aps_timestamps: &[(String, u64)],
    duration: u64,
    alignment: Alignment,
) -> Result<FramePairing, PseudolabelError> {
    if duration == 0 {
        return Err(PseudolabelError::ZeroWindow);
    }
    let mut prev: Option<u64> = None;
    let mut entries = Vec::with_capacity(aps_timestamps.len());
    for (frame_id, t) in aps_timestamps {
        if let Some(p) = prev {
            if *t <= p {
                return Err(PseudolabelError::NonIncreasingTimestamps {
                    frame_id: frame_id.clone(),
                    prev_t_us: p,
                    t_us: *t,
                });
            }
        }
        prev = Some(*t);
        let (t0, d) = match alignment {
            Alignment::Preceding => {
                let t0 = t.saturating_sub(duration);
                if *t == 0 {
                    return Err(PseudolabelError::EmptyWindow {
                        frame_id: frame_id.clone(),
                    });
                }
                (t0, t - t0)
            }
            Alignment::Following => (*t, duration),
        };
        entries.push(PairedWindow {
            frame_id: frame_id.clone(),
            aps_t_us: *t,
            window_t0: t0,
            window_duration: d,
        });
    }
    Ok(FramePairing { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ExportReport {
    pub files_written: usize,
    pub boxes_written: usize,
    /// Boxes entirely outside the sensor, dropped from the label files.
    pub boxes_skipped: usize,
}

fn fmt_norm(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Writes one label file per paired window into `out_dir`, named
/// `<recording>_<window t0, 12 digits>.txt` to line up with rendered frames.
///
/// Lines are `class cx cy w h` with center/size normalized by the sensor
/// dimensions. Confidence is dropped: downstream training treats these as
/// ground truth. Boxes overhanging the sensor are clipped; boxes entirely
/// outside are skipped and counted. Zero-box frames still produce their
/// (empty) file so negatives stay in the dataset.
pub fn export_labels(
    pairing: &FramePairing,
    dets: &[DetectionSet],
    out_dir: &Path,
    recording: &str,
    sensor: (u16, u16),
) -> Result<ExportReport, PseudolabelError> {
    assert!(sensor.0 > 0 && sensor.1 > 0, "sensor size must be positive");
    let by_id: HashMap<&str, &DetectionSet> =
        dets.iter().map(|d| (d.frame_id.as_str(), d)).collect();
    let (sw, sh) = (sensor.0 as f64, sensor.1 as f64);
    let mut report = ExportReport::default();
    fs::create_dir_all(out_dir)?;
    for window in &pairing.entries {
        let set =
            by_id
                .get(window.frame_id.as_str())
                .ok_or_else(|| PseudolabelError::MissingFrame {
                    frame_id: window.frame_id.clone(),
                })?;
        let mut text = String::new();
        for b in &set.boxes {
            let x0 = b.x0.clamp(0.0, sw);
            let x1 = b.x1.clamp(0.0, sw);
            let y0 = b.y0.clamp(0.0, sh);
            let y1 = b.y1.clamp(0.0, sh);
            if x0 >= x1 || y0 >= y1 {
                report.boxes_skipped += 1;
                continue;
            }
            let cx = (x0 + x1) / 2.0 / sw;
            let cy = (y0 + y1) / 2.0 / sh;
            let w = (x1 - x0) / sw;
            let h = (y1 - y0) / sh;
            text.push_str(&format!(
                "{} {} {} {} {}\n",
                b.class_label,
                fmt_norm(cx),
                fmt_norm(cy),
                fmt_norm(w),
                fmt_norm(h)
            ));
            report.boxes_written += 1;
        }
        let name = format!("{recording}_{:012}.txt", window.window_t0);
        fs::write(out_dir.join(name), text)?;
        report.files_written += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// Split input: one recording's identity and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingInfo {
    pub id: String,
    pub scene: String,
    pub condition: String,
    pub duration_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub recording_id: String,
    pub scene: String,
    pub condition: String,
    pub duration_us: u64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingManifest {
    pub entries: Vec<ManifestEntry>,
}

impl RecordingManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<RecordingManifest, PseudolabelError> {
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(text).map_err(|e| PseudolabelError::BadManifest(e.to_string()))?;
        Ok(RecordingManifest { entries })
    }

    /// Total duration per split, in train/val/test order.
    pub fn split_durations(&self) -> [u64; 3] {
        let mut out = [0u64; 3];
        for e in &self.entries {
            let i = Split::ALL.iter().position(|s| *s == e.split).unwrap();
            out[i] += e.duration_us;
        }
        out
    }
}

/// Assigns whole recordings to train/val/test so split durations approach the
/// requested ratios.
///
/// Greedy: walk recordings longest first, put each into the split whose
/// current duration divided by its target fraction is smallest (ties resolve
/// train, then val, then test). Whole recordings move as units, so no frame
/// of one recording can land in two splits.
pub fn build_split_manifest(
    recordings: &[RecordingInfo],
    ratios: (f64, f64, f64),
) -> Result<RecordingManifest, PseudolabelError> {
    let (rt, rv, rs) = ratios;
    if !(rt > 0.0 && rv > 0.0 && rs > 0.0 && (rt + rv + rs).is_finite()) {
        return Err(PseudolabelError::BadRatios);
    }
    if recordings.len() < 3 {
        return Err(PseudolabelError::TooFewRecordings {
            got: recordings.len(),
            need: 3,
        });
    }
    let mut seen = std::collections::HashSet::new();
    for r in recordings {
        if !seen.insert(r.id.as_str()) {
            return Err(PseudolabelError::DuplicateRecording(r.id.clone()));
        }
        if r.duration_us == 0 {
            return Err(PseudolabelError::ZeroRecordingDuration(r.id.clone()));
        }
    }
    let total = rt + rv + rs;
    let targets = [rt / total, rv / total, rs / total];

    let mut order: Vec<usize> = (0..recordings.len()).collect();
    order.sort_by(|&a, &b| recordings[b].duration_us.cmp(&recordings[a].duration_us));

    let mut load = [0u64; 3];
    let mut assignment = vec![Split::Train; recordings.len()];
    for &i in &order {
        let mut best = 0;
        for s in 1..3 {
            if (load[s] as f64) / targets[s] < (load[best] as f64) / targets[best] {
                best = s;
            }
        }
        load[best] += recordings[i].duration_us;
        assignment[i] = Split::ALL[best];
    }

    let entries = recordings
        .iter()
        .zip(assignment)
        .map(|(r, split)| ManifestEntry {
            recording_id: r.id.clone(),
            scene: r.scene.clone(),
            condition: r.condition.clone(),
            duration_us: r.duration_us,
            split,
        })
        .collect();
    Ok(RecordingManifest { entries })
}
