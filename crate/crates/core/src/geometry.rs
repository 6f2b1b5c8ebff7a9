//! Axis-aligned box arithmetic and the per-frame error functionals.
//!
//! Coordinates follow the image convention: origin at the top-left corner,
//! `x` to the right, `y` down, sub-pixel values allowed. A frame without a
//! prediction is represented as `None` wherever an `Option<BBox>` appears.

use serde::{Deserialize, Serialize};

/// Axis-aligned bounding box in pixel coordinates (left, top, width, height).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// A point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Box of the given size centred on `center`.
    pub fn from_center(center: Point2, w: f64, h: f64) -> Self {
        Self::new(center.u - w / 2.0, center.v - h / 2.0, w, h)
    }

    /// Smallest box containing both corners.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(x0.min(x1), y0.min(y1), (x1 - x0).abs(), (y1 - y0).abs())
    }

    /// Positive, finite width and height.
    pub fn is_valid(&self) -> bool {
        self.w > 0.0
            && self.h > 0.0
            && self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.w / self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Per-axis scaling of all four fields.
    pub fn scale(&self, sx: f64, sy: f64) -> Self {
        Self::new(self.x * sx, self.y * sy, self.w * sx, self.h * sy)
    }

    /// Area of the overlap with `other`, zero when disjoint.
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = span_overlap(self.x, self.w, other.x, other.w);
        let ih = span_overlap(self.y, self.h, other.y, other.h);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Clip to `[0, width] x [0, height]`. Returns `None` if nothing is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width);
        let y1 = self.bottom().min(height);
        if x1 > x0 && y1 > y0 {
            Some(BBox::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    /// Shift (without resizing) so the box lies inside the frame. Boxes larger
    /// than the frame are shrunk to it.
    pub fn clamp_inside(&self, width: f64, height: f64) -> BBox {
        let w = self.w.min(width);
        let h = self.h.min(height);
        let x = self.x.clamp(0.0, width - w);
        let y = self.y.clamp(0.0, height - h);
        BBox::new(x, y, w, h)
    }

    /// True when the box lies fully inside `[0, width] x [0, height]`.
    pub fn is_inside(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// Intersection over union. Zero when either box is empty (non-positive
/// size) or the boxes are disjoint.
/// Length of the overlap of `[a, a + aw]` and `[b, b + bw]`. Nested spans
/// return the inner width untouched so that `iou(a, a)` is exactly 1.
fn span_overlap(a: f64, aw: f64, b: f64, bw: f64) -> f64 {
    let (ar, br) = (a + aw, b + bw);
    if a >= b && ar <= br {
        aw
    } else if b >= a && br <= ar {
        bw
    } else {
        ar.min(br) - a.max(b)
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    if !a.is_valid() || !b.is_valid() {
        return 0.0;
    }
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of a possibly-missing prediction against the ground truth.
pub fn overlap(pred: Option<&BBox>, gt: &BBox) -> f64 {
    pred.map_or(0.0, |p| iou(p, gt))
}

/// Euclidean distance between box centres in pixels; `+inf` for a missing
/// prediction so it fails every threshold.
pub fn center_error(pred: Option<&BBox>, gt: &BBox) -> f64 {
    match pred {
        Some(p) if p.is_valid() => p.center().distance(&gt.center()),
        _ => f64::INFINITY,
    }
}

/// Centre offset with each axis divided by the ground-truth box size.
pub fn normalized_center_error(pred: Option<&BBox>, gt: &BBox) -> f64 {
    match pred {
        Some(p) if p.is_valid() => {
            let (pc, gc) = (p.center(), gt.center());
            ((pc.u - gc.u) / gt.w).hypot((pc.v - gc.v) / gt.h)
        }
        _ => f64::INFINITY,
    }
}
