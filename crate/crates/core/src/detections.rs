//! Detection interchange: per-frame box sets and their JSONL file form.
//!
//! One JSON object per box, keys `frame_id, t_us, class, conf, x0, y0, x1,
//! y1`; consecutive lines sharing a `frame_id` belong to one frame. The
//! detector tag is not serialized; ingestion stamps the caller's tag on
//! every set, so write → ingest is the identity for same-source sets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BoundingBox, GeometryError};

#[derive(Debug, Error)]
pub enum DetectionsError {
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("line {line}: invalid box: {source}")]
    Box { line: usize, source: GeometryError },
    #[error("line {line}: frame {frame_id:?} changes t_us from {first} to {t_us}")]
    InconsistentTime {
        line: usize,
        frame_id: String,
        first: u64,
        t_us: u64,
    },
    #[error("frame_id must be non-empty")]
    EmptyFrameId,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// All boxes a detector produced for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub frame_id: String,
    pub t_us: u64,
    pub boxes: Vec<BoundingBox>,
    /// Detector tag, e.g. "aps-yolo" or "blob".
    pub source: String,
}

#[derive(Serialize, Deserialize)]
struct JsonlRecord {
    frame_id: String,
    t_us: u64,
    class: String,
    conf: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

/// Parses JSONL text into per-frame sets, grouped by `frame_id` in first-seen
/// order with boxes in file order. Every set gets the given `source` tag.
pub fn parse_detections_jsonl(
    text: &str,
    source: &str,
) -> Result<Vec<DetectionSet>, DetectionsError> {
    let mut sets: Vec<DetectionSet> = Vec::new();
    let mut by_id: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(raw).map_err(|e| DetectionsError::Line {
            line,
            reason: e.to_string(),
        })?;
        if rec.frame_id.is_empty() {
            return Err(DetectionsError::Line {
                line,
                reason: "empty frame_id".into(),
            });
        }
        let b = BoundingBox::new(rec.x0, rec.y0, rec.x1, rec.y1, rec.conf, &rec.class)
            .map_err(|source| DetectionsError::Box { line, source })?;
        match by_id.get(&rec.frame_id) {
            Some(&idx) => {
                if sets[idx].t_us != rec.t_us {
                    return Err(DetectionsError::InconsistentTime {
                        line,
                        frame_id: rec.frame_id,
                        first: sets[idx].t_us,
                        t_us: rec.t_us,
                    });
                }
                sets[idx].boxes.push(b);
            }
            None => {
                by_id.insert(rec.frame_id.clone(), sets.len());
                sets.push(DetectionSet {
                    frame_id: rec.frame_id,
                    t_us: rec.t_us,
                    boxes: vec![b],
                    source: source.to_string(),
                });
            }
        }
    }
    Ok(sets)
}

pub fn ingest_detections(path: &Path, source: &str) -> Result<Vec<DetectionSet>, DetectionsError> {
    parse_detections_jsonl(&fs::read_to_string(path)?, source)
}

/// Serializes sets as JSONL, one line per box. Frames with zero boxes leave
/// no trace in the file; the `source` tag is likewise not stored.
pub fn write_detections_jsonl(sets: &[DetectionSet]) -> Result<String, DetectionsError> {
    let mut out = String::new();
    for set in sets {
        if set.frame_id.is_empty() {
            return Err(DetectionsError::EmptyFrameId);
        }
        for b in &set.boxes {
            let rec = JsonlRecord {
                frame_id: set.frame_id.clone(),
                t_us: set.t_us,
                class: b.class_label.clone(),
                conf: b.confidence,
                x0: b.x0,
                y0: b.y0,
                x1: b.x1,
                y1: b.y1,
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn export_detections(sets: &[DetectionSet], path: &Path) -> Result<(), DetectionsError> {
    fs::write(path, write_detections_jsonl(sets)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x0: f64, conf: f64) -> BoundingBox {
        BoundingBox::new(x0, 10.0, x0 + 20.0, 40.0, conf, "car").unwrap()
    }

    #[test]
    fn empty_text_is_empty_sequence() {
        assert_eq!(parse_detections_jsonl("", "x").unwrap(), vec![]);
        assert_eq!(parse_detections_jsonl("\n\n", "x").unwrap(), vec![]);
    }

    #[test]
    fn groups_consecutive_lines_by_frame() {
        let text = concat!(
            r#"{"frame_id":"f0","t_us":1000,"class":"car","conf":0.9,"x0":1.0,"y0":2.0,"x1":30.0,"y1":40.0}"#,
            "\n",
            r#"{"frame_id":"f0","t_us":1000,"class":"car","conf":0.8,"x0":5.0,"y0":2.0,"x1":35.0,"y1":40.0}"#,
            "\n",
        );
        let sets = parse_detections_jsonl(text, "det").unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].frame_id, "f0");
        assert_eq!(sets[0].t_us, 1000);
        assert_eq!(sets[0].boxes.len(), 2);
        assert_eq!(sets[0].boxes[0].confidence, 0.9);
        assert_eq!(sets[0].source, "det");
    }

    #[test]
    fn round_trip_is_identity() {
        let sets = vec![
            DetectionSet {
                frame_id: "rec_000000000000".into(),
                t_us: 0,
                boxes: vec![bb(1.5, 0.75), bb(100.25, 0.5)],
                source: "aps".into(),
            },
            DetectionSet {
                frame_id: "rec_000000010000".into(),
                t_us: 10_000,
                boxes: vec![bb(33.125, 1.0)],
                source: "aps".into(),
            },
        ];
        let text = write_detections_jsonl(&sets).unwrap();
        assert_eq!(parse_detections_jsonl(&text, "aps").unwrap(), sets);
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = concat!(
            r#"{"frame_id":"f0","t_us":0,"class":"car","conf":0.9,"x0":1.0,"y0":2.0,"x1":30.0,"y1":40.0}"#,
            "\n",
            "{not json}\n",
        );
        match parse_detections_jsonl(text, "x") {
            Err(DetectionsError::Line { line: 2, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn invalid_geometry_reports_line() {
        let text = r#"{"frame_id":"f0","t_us":0,"class":"car","conf":0.9,"x0":30.0,"y0":2.0,"x1":30.0,"y1":40.0}"#;
        match parse_detections_jsonl(text, "x") {
            Err(DetectionsError::Box { line: 1, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn conflicting_frame_time_is_rejected() {
        let text = concat!(
            r#"{"frame_id":"f0","t_us":0,"class":"car","conf":0.9,"x0":1.0,"y0":2.0,"x1":30.0,"y1":40.0}"#,
            "\n",
            r#"{"frame_id":"f0","t_us":7,"class":"car","conf":0.9,"x0":1.0,"y0":2.0,"x1":30.0,"y1":40.0}"#,
            "\n",
        );
        assert!(matches!(
            parse_detections_jsonl(text, "x"),
            Err(DetectionsError::InconsistentTime { line: 2, .. })
        ));
    }

    #[test]
    fn interleaved_frames_group_to_first_seen_order() {
        let mk = |id: &str, conf: f64| {
            format!(
                r#"{{"frame_id":"{id}","t_us":0,"class":"car","conf":{conf},"x0":1.0,"y0":2.0,"x1":30.0,"y1":40.0}}"#
            )
        };
        let text = [mk("b", 0.9), mk("a", 0.8), mk("b", 0.7)].join("\n");
        let sets = parse_detections_jsonl(&text, "x").unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].frame_id, "b");
        assert_eq!(sets[0].boxes.len(), 2);
        assert_eq!(sets[1].frame_id, "a");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.jsonl");
        let sets = vec![DetectionSet {
            frame_id: "f".into(),
            t_us: 5,
            boxes: vec![bb(0.0, 0.25)],
            source: "s".into(),
        }];
        export_detections(&sets, &path).unwrap();
        assert_eq!(ingest_detections(&path, "s").unwrap(), sets);
    }
}
