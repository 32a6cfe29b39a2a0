//! Detection evaluation: greedy IoU matching, precision/recall and average
//! precision, confidence-free detected-fraction set analysis, and
//! cross-detector fusion.
//!
//! Matching rule (shared by every consumer here): detections are ranked by
//! descending confidence (ties by frame order, then input order) and each is
//! offered the unmatched ground truth of highest IoU in its frame, chosen
//! without regard to the threshold and with ties to the lowest index. The
//! detection becomes a TP iff that IoU reaches the threshold. Picking the
//! argmax before applying the threshold makes TP counts, and therefore AP,
//! monotone in the threshold.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::detections::DetectionSet;
use crate::geometry::{iou, nms, BoundingBox};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no ground-truth boxes survive filtering; the metric is undefined")]
    NoGroundTruth,
    #[error("fusion inputs refer to different frames: {a:?} vs {b:?}")]
    FrameMismatch { a: String, b: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GtKey {
    /// Index of the ground-truth frame in the input sequence.
    pub frame: usize,
    /// Box index within that frame.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedDetection {
    /// Index of the detection's frame in the input sequence.
    pub frame: usize,
    /// Box index within that frame.
    pub index: usize,
    pub confidence: f64,
    /// IoU with the matched ground truth (or the best rejected candidate).
    pub iou: f64,
    pub matched: Option<GtKey>,
}

impl RankedDetection {
    pub fn is_tp(&self) -> bool {
        self.matched.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// Detections in evaluation order (descending confidence).
    pub detections: Vec<RankedDetection>,
    /// Ground truths remaining after the min-height filter.
    pub gt_count: usize,
}

impl MatchResult {
    pub fn tp_count(&self) -> usize {
        self.detections.iter().filter(|d| d.is_tp()).count()
    }

    pub fn fp_count(&self) -> usize {
        self.detections.len() - self.tp_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub iou_threshold: f64,
    /// Boxes (ground truth and detections alike) shorter than this are
    /// removed before matching.
    pub min_height: f64,
    /// When set, a would-be FP overlapping a height-filtered ground truth at
    /// or above the IoU threshold is dropped from the ranking instead of
    /// counted against precision (KITTI-style don't-care regions).
    pub ignore_filtered_gt: bool,
}

impl Default for MatchParams {
    fn default() -> MatchParams {
        MatchParams {
            iou_threshold: 0.5,
            min_height: 25.0,
            ignore_filtered_gt: false,
        }
    }
}

struct GtFrames<'a> {
    by_id: HashMap<&'a str, usize>,
    /// Per reachable frame: (kept box indices, filtered-out box indices).
    kept: Vec<Vec<usize>>,
    removed: Vec<Vec<usize>>,
    sets: &'a [DetectionSet],
    gt_count: usize,
}

impl<'a> GtFrames<'a> {
    fn build(gts: &'a [DetectionSet], min_height: f64) -> GtFrames<'a> {
        let mut by_id = HashMap::new();
        let mut kept = vec![Vec::new(); gts.len()];
        let mut removed = vec![Vec::new(); gts.len()];
        let mut gt_count = 0;
        for (j, set) in gts.iter().enumerate() {
            if by_id.contains_key(set.frame_id.as_str()) {
                continue;
            }
            by_id.insert(set.frame_id.as_str(), j);
            for (g, b) in set.boxes.iter().enumerate() {
                if b.height() >= min_height {
                    kept[j].push(g);
                    gt_count += 1;
                } else {
                    removed[j].push(g);
                }
            }
        }
        GtFrames {
            by_id,
            kept,
            removed,
            sets: gts,
            gt_count,
        }
    }

    fn gt_box(&self, key: GtKey) -> &BoundingBox {
        &self.sets[key.frame].boxes[key.index]
    }
}

/// Detections passing the height filter, in evaluation order.
fn ranked_candidates(dets: &[DetectionSet], min_height: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<(usize, usize)> = Vec::new();
    for (f, set) in dets.iter().enumerate() {
        for (i, b) in set.boxes.iter().enumerate() {
            if b.height() >= min_height {
                order.push((f, i));
            }
        }
    }
    order.sort_by(|&(fa, ia), &(fb, ib)| {
        let ca = dets[fa].boxes[ia].confidence;
        let cb = dets[fb].boxes[ib].confidence;
        cb.partial_cmp(&ca)
            .expect("confidence is finite")
            .then(fa.cmp(&fb))
            .then(ia.cmp(&ib))
    });
    order
}

/// Greedy one-to-one matching of detections to ground truths, frame by frame
/// (frames correspond through their `frame_id`).
pub fn match_detections(
    dets: &[DetectionSet],
    gts: &[DetectionSet],
    params: &MatchParams,
) -> MatchResult {
    assert!(
        (0.0..=1.0).contains(&params.iou_threshold),
        "IoU threshold must be in [0,1]"
    );
    assert!(params.min_height >= 0.0, "min height must be non-negative");
    let gt = GtFrames::build(gts, params.min_height);
    let mut taken: HashMap<GtKey, ()> = HashMap::new();
    let mut out = Vec::new();

    for (f, i) in ranked_candidates(dets, params.min_height) {
        let det = &dets[f].boxes[i];
        let frame = gt.by_id.get(dets[f].frame_id.as_str()).copied();
        let mut best: Option<(f64, GtKey)> = None;
        if let Some(j) = frame {
            for &g in &gt.kept[j] {
                let key = GtKey { frame: j, index: g };
                if taken.contains_key(&key) {
                    continue;
                }
                let v = iou(det, gt.gt_box(key));
                if best.is_none_or(|(bv, _)| v > bv) {
                    best = Some((v, key));
                }
            }
        }
        match best {
            Some((v, key)) if v >= params.iou_threshold => {
                taken.insert(key, ());
                out.push(RankedDetection {
                    frame: f,
                    index: i,
                    confidence: det.confidence,
                    iou: v,
                    matched: Some(key),
                });
            }
            _ => {
                let best_iou = best.map_or(0.0, |(v, _)| v);
                if params.ignore_filtered_gt {
                    if let Some(j) = frame {
                        let hits_dont_care = gt.removed[j]
                            .iter()
                            .any(|&g| iou(det, &gts[j].boxes[g]) >= params.iou_threshold);
                        if hits_dont_care {
                            continue;
                        }
                    }
                }
                out.push(RankedDetection {
                    frame: f,
                    index: i,
                    confidence: det.confidence,
                    iou: best_iou,
                    matched: None,
                });
            }
        }
    }
    MatchResult {
        detections: out,
        gt_count: gt.gt_count,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Area under the monotonized PR curve over every distinct recall.
    AllPoint,
    /// Mean of interpolated precision at recalls 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    /// Cumulative (recall, precision) after each ranked detection.
    pub points: Vec<(f64, f64)>,
    pub ap: f64,
}

/// PR curve and average precision under the chosen interpolation.
///
/// Errors when no ground truth survives filtering: recall, and with it AP,
/// is undefined there, which is not the same thing as an AP of zero.
pub fn pr_curve(m: &MatchResult, interpolation: Interpolation) -> Result<PrCurve, EvalError> {
    if m.gt_count == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let n = m.detections.len();
    let mut points = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (i, d) in m.detections.iter().enumerate() {
        if d.is_tp() {
            tp += 1;
        }
        points.push((tp as f64 / m.gt_count as f64, tp as f64 / (i + 1) as f64));
    }

    // interpolated precision: best precision at this recall or beyond
    let mut interp = vec![0.0f64; n];
    let mut running = 0.0f64;
    for i in (0..n).rev() {
        running = running.max(points[i].1);
        interp[i] = running;
    }

    let ap = match interpolation {
        Interpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for i in 0..n {
                let r = points[i].0;
                if r > prev_recall {
                    ap += (r - prev_recall) * interp[i];
                    prev_recall = r;
                }
            }
            ap
        }
        Interpolation::ElevenPoint => {
            let mut total = 0.0;
            for k in 0..=10 {
                let r = k as f64 / 10.0;
                let p = points
                    .iter()
                    .zip(&interp)
                    .find(|((recall, _), _)| *recall >= r - 1e-12)
                    .map_or(0.0, |(_, &p)| p);
                total += p;
            }
            total / 11.0
        }
    };
    Ok(PrCurve { points, ap })
}

pub fn average_precision(m: &MatchResult) -> Result<f64, EvalError> {
    Ok(pr_curve(m, Interpolation::AllPoint)?.ap)
}

/// Ground truths found by at least one detection, ignoring confidence.
///
/// Candidate (detection, ground truth) pairs at or above the IoU threshold
/// are taken greedily by descending IoU (ties by frame, ground-truth index,
/// then detection index), one-to-one on both sides. Returns the matched
/// ground-truth keys plus the filtered ground-truth count.
fn detected_gt_keys(
    dets: &[DetectionSet],
    gts: &[DetectionSet],
    iou_threshold: f64,
    min_height: f64,
) -> (BTreeSet<GtKey>, usize) {
    let gt = GtFrames::build(gts, min_height);
    struct Pair {
        iou: f64,
        key: GtKey,
        det: (usize, usize),
    }
    let mut pairs: Vec<Pair> = Vec::new();
    for (f, set) in dets.iter().enumerate() {
        let Some(&j) = gt.by_id.get(set.frame_id.as_str()) else {
            continue;
        };
        for (i, b) in set.boxes.iter().enumerate() {
            if b.height() < min_height {
                continue;
            }
            for &g in &gt.kept[j] {
                let key = GtKey { frame: j, index: g };
                let v = iou(b, gt.gt_box(key));
                if v >= iou_threshold {
                    pairs.push(Pair {
                        iou: v,
                        key,
                        det: (f, i),
                    });
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.iou
            .partial_cmp(&a.iou)
            .expect("IoU is finite")
            .then(a.key.cmp(&b.key))
            .then(a.det.cmp(&b.det))
    });
    let mut matched: BTreeSet<GtKey> = BTreeSet::new();
    let mut used_det: BTreeSet<(usize, usize)> = BTreeSet::new();
    for p in pairs {
        if !matched.contains(&p.key) && !used_det.contains(&p.det) {
            matched.insert(p.key);
            used_det.insert(p.det);
        }
    }
    (matched, gt.gt_count)
}

/// Fraction of ground-truth objects found by any detection, regardless of
/// confidence score.
pub fn fraction_detected(
    dets: &[DetectionSet],
    gts: &[DetectionSet],
    iou_threshold: f64,
    min_height: f64,
) -> Result<f64, EvalError> {
    let (matched, gt_count) = detected_gt_keys(dets, gts, iou_threshold, min_height);
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    Ok(matched.len() as f64 / gt_count as f64)
}

/// Detected-fraction set analysis for two detectors over one ground truth.
/// Integer counts are exact; fractions are counts over `gt_count`, so
/// `matched_a + matched_b == matched_union + matched_intersection` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SetAnalysis {
    #[serde(skip)]
    pub gt_count: usize,
    #[serde(skip)]
    pub matched_a: usize,
    #[serde(skip)]
    pub matched_b: usize,
    #[serde(skip)]
    pub matched_intersection: usize,
    #[serde(skip)]
    pub matched_union: usize,
    pub frac_a: f64,
    pub frac_b: f64,
    pub frac_intersection: f64,
    pub frac_union: f64,
}

pub fn set_analysis(
    dets_a: &[DetectionSet],
    dets_b: &[DetectionSet],
    gts: &[DetectionSet],
    iou_threshold: f64,
    min_height: f64,
) -> Result<SetAnalysis, EvalError> {
    let (set_a, gt_count) = detected_gt_keys(dets_a, gts, iou_threshold, min_height);
    let (set_b, _) = detected_gt_keys(dets_b, gts, iou_threshold, min_height);
    if gt_count == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    let matched_intersection = set_a.intersection(&set_b).count();
    let matched_union = set_a.union(&set_b).count();
    let g = gt_count as f64;
    Ok(SetAnalysis {
        gt_count,
        matched_a: set_a.len(),
        matched_b: set_b.len(),
        matched_intersection,
        matched_union,
        frac_a: set_a.len() as f64 / g,
        frac_b: set_b.len() as f64 / g,
        frac_intersection: matched_intersection as f64 / g,
        frac_union: matched_union as f64 / g,
    })
}

/// Pools two detectors' boxes for one frame and resolves overlaps with NMS.
pub fn fuse_detections(
    a: &DetectionSet,
    b: &DetectionSet,
    nms_iou: f64,
) -> Result<DetectionSet, EvalError> {
    if a.frame_id != b.frame_id {
        return Err(EvalError::FrameMismatch {
            a: a.frame_id.clone(),
            b: b.frame_id.clone(),
        });
    }
    let mut pooled = a.boxes.clone();
    pooled.extend(b.boxes.iter().cloned());
    Ok(DetectionSet {
        frame_id: a.frame_id.clone(),
        t_us: a.t_us,
        boxes: nms(&pooled, nms_iou),
        source: format!("{}+{}", a.source, b.source),
    })
}

/// Fuses two per-frame sequences by `frame_id`. Frames present in only one
/// input still pass through NMS; output order is A's frames first, then
/// B-only frames.
pub fn fuse_all(
    a: &[DetectionSet],
    b: &[DetectionSet],
    nms_iou: f64,
) -> Result<Vec<DetectionSet>, EvalError> {
    let b_by_id: HashMap<&str, usize> = b
        .iter()
        .enumerate()
        .map(|(i, s)| (s.frame_id.as_str(), i))
        .collect();
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for set in a {
        match b_by_id.get(set.frame_id.as_str()) {
            Some(&i) => {
                used_b[i] = true;
                out.push(fuse_detections(set, &b[i], nms_iou)?);
            }
            None => out.push(DetectionSet {
                boxes: nms(&set.boxes, nms_iou),
                ..set.clone()
            }),
        }
    }
    for (i, set) in b.iter().enumerate() {
        if !used_b[i] {
            out.push(DetectionSet {
                boxes: nms(&set.boxes, nms_iou),
                ..set.clone()
            });
        }
    }
    Ok(out)
}

/// One evaluation threshold's results, shaped for the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdBlock {
    pub iou: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub gt_count: usize,
    pub pr_curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub thresholds: Vec<ThresholdBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_analysis: Option<SetAnalysis>,
}

pub fn threshold_block(
    dets: &[DetectionSet],
    gts: &[DetectionSet],
    params: &MatchParams,
    interpolation: Interpolation,
) -> Result<ThresholdBlock, EvalError> {
    let m = match_detections(dets, gts, params);
    let curve = pr_curve(&m, interpolation)?;
    Ok(ThresholdBlock {
        iou: params.iou_threshold,
        ap: curve.ap,
        tp: m.tp_count(),
        fp: m.fp_count(),
        gt_count: m.gt_count,
        pr_curve: curve.points,
    })
}
