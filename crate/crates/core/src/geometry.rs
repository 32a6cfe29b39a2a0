//! Bounding-box arithmetic: IoU, greedy non-maximum suppression, minimum-height
//! filtering, and the aspect-preserving letterbox transform between sensor and
//! detector coordinates.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate box: ({x0},{y0})-({x1},{y1}) must have positive width and height")]
    DegenerateBox { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("confidence {0} outside [0,1]")]
    BadConfidence(f64),
    #[error("box coordinates must be finite")]
    NonFiniteCoordinate,
}

/// Class-labeled, confidence-scored axis-aligned box with real-valued corners.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    /// Detector confidence in [0, 1].
    pub confidence: f64,
    pub class_label: String,
}

impl BoundingBox {
    /// Validated constructor: requires `x0 < x1`, `y0 < y1`, finite corners and
    /// confidence in [0, 1].
    pub fn new(
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        confidence: f64,
        class_label: &str,
    ) -> Result<BoundingBox, GeometryError> {
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(GeometryError::NonFiniteCoordinate);
        }
        if !(x0 < x1 && y0 < y1) {
            return Err(GeometryError::DegenerateBox { x0, y0, x1, y1 });
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(GeometryError::BadConfidence(confidence));
        }
        Ok(BoundingBox {
            x0,
            y0,
            x1,
            y1,
            confidence,
            class_label: class_label.to_string(),
        })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Intersection over union of two boxes; 0 when disjoint, 1 iff identical.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.x1.min(b.x1) - a.x0.max(b.x0)).max(0.0);
    let iy = (a.y1.min(b.y1) - a.y0.max(b.y0)).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Greedy non-maximum suppression.
///
/// Boxes are visited in descending confidence (ties keep input order); a box
/// is kept iff its IoU with every previously kept box is at or below the
/// threshold (suppression is strict: exact-threshold pairs survive). Kept
/// boxes are returned in visit order with their fields untouched.
pub fn nms(boxes: &[BoundingBox], iou_threshold: f64) -> Vec<BoundingBox> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        boxes[b]
            .confidence
            .partial_cmp(&boxes[a].confidence)
            .expect("confidence is finite")
    });
    let mut kept: Vec<usize> = Vec::new();
    for &candidate in &order {
        if kept
            .iter()
            .all(|&k| iou(&boxes[k], &boxes[candidate]) <= iou_threshold)
        {
            kept.push(candidate);
        }
    }
    kept.into_iter().map(|i| boxes[i].clone()).collect()
}

/// Keeps boxes whose pixel height is at least `min_height` (inclusive).
pub fn filter_min_height(boxes: &[BoundingBox], min_height: f64) -> Vec<BoundingBox> {
    boxes
        .iter()
        .filter(|b| b.height() >= min_height)
        .cloned()
        .collect()
}

/// Aspect-preserving scale of a source frame into a destination frame, with
/// the remainder zero-padded. Padding is placed entirely on the right and
/// bottom, so the content origin stays at (0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LetterboxTransform {
    /// min(dst_w/src_w, dst_h/src_h)
    pub scale: f64,
    /// Total horizontal padding in destination pixels.
    pub pad_x: f64,
    /// Total vertical padding in destination pixels.
    pub pad_y: f64,
    pub src_size: (u16, u16),
    pub dst_size: (u16, u16),
}

impl LetterboxTransform {
    /// Panics if any dimension is zero.
    pub fn new(src_size: (u16, u16), dst_size: (u16, u16)) -> LetterboxTransform {
        assert!(
            src_size.0 > 0 && src_size.1 > 0,
            "source size must be positive"
        );
        assert!(
            dst_size.0 > 0 && dst_size.1 > 0,
            "destination size must be positive"
        );
        let sx = dst_size.0 as f64 / src_size.0 as f64;
        let sy = dst_size.1 as f64 / src_size.1 as f64;
        let scale = sx.min(sy);
        LetterboxTransform {
            scale,
            pad_x: dst_size.0 as f64 - src_size.0 as f64 * scale,
            pad_y: dst_size.1 as f64 - src_size.1 as f64 * scale,
            src_size,
            dst_size,
        }
    }

    /// Maps a source-frame box into destination coordinates.
    pub fn apply(&self, b: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x0: b.x0 * self.scale,
            y0: b.y0 * self.scale,
            x1: b.x1 * self.scale,
            y1: b.y1 * self.scale,
            confidence: b.confidence,
            class_label: b.class_label.clone(),
        }
    }

    /// Maps a destination-frame box back to source coordinates, clamped to the
    /// source extent. Boxes that collapse to zero width or height after
    /// clamping are dropped (`None`).
    pub fn invert(&self, b: &BoundingBox) -> Option<BoundingBox> {
        let (w, h) = (self.src_size.0 as f64, self.src_size.1 as f64);
        let x0 = (b.x0 / self.scale).clamp(0.0, w);
        let y0 = (b.y0 / self.scale).clamp(0.0, h);
        let x1 = (b.x1 / self.scale).clamp(0.0, w);
        let y1 = (b.y1 / self.scale).clamp(0.0, h);
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        Some(BoundingBox {
            x0,
            y0,
            x1,
            y1,
            confidence: b.confidence,
            class_label: b.class_label.clone(),
        })
    }
}
