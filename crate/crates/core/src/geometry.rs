//! Points, quadrilaterals and axis-aligned boxes in pixel coordinates.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Four corner points, clockwise starting at the top-left in the usual
/// ICDAR convention. Stored exactly as annotated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 4]", into = "[[f64; 2]; 4]")]
pub struct Quad(pub [Point; 4]);

impl From<[[f64; 2]; 4]> for Quad {
    fn from(v: [[f64; 2]; 4]) -> Self {
        Quad(v.map(|[x, y]| Point::new(x, y)))
    }
}

impl From<Quad> for [[f64; 2]; 4] {
    fn from(q: Quad) -> Self {
        q.0.map(|p| [p.x, p.y])
    }
}

impl Quad {
    /// Axis-aligned hull of the four corners.
    pub fn bbox(&self) -> BBox {
        let xs = self.0.map(|p| p.x);
        let ys = self.0.map(|p| p.y);
        let min = |v: [f64; 4]| v.into_iter().fold(f64::INFINITY, f64::min);
        let max = |v: [f64; 4]| v.into_iter().fold(f64::NEG_INFINITY, f64::max);
        let (x0, x1) = (min(xs), max(xs));
        let (y0, y1) = (min(ys), max(ys));
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }
}

/// Axis-aligned box `(x, y, w, h)`; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for BBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Intersection over union in `[0, 1]`; two empty boxes have IoU 0.
    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Clamp to `[0, width] × [0, height]`.
    pub fn clamp_to(&self, width: u32, height: u32) -> BBox {
        let (wf, hf) = (f64::from(width), f64::from(height));
        let x0 = self.x.clamp(0.0, wf);
        let y0 = self.y.clamp(0.0, hf);
        let x1 = self.right().clamp(0.0, wf);
        let y1 = self.bottom().clamp(0.0, hf);
        BBox::new(x0, y0, (x1 - x0).max(0.0), (y1 - y0).max(0.0))
    }

    pub fn scale(&self, sx: f64, sy: f64) -> BBox {
        BBox::new(self.x * sx, self.y * sy, self.w * sx, self.h * sy)
    }

    /// Integer pixel span `[x0, x1) × [y0, y1)` covered by the box, after
    /// rounding each edge to the nearest pixel boundary and clamping.
    pub fn pixel_rect(&self, width: u32, height: u32) -> Rect {
        let edge = |v: f64, hi: u32| -> u32 {
            let r = libm::round(v);
            if r <= 0.0 {
                0
            } else if r >= f64::from(hi) {
                hi
            } else {
                r as u32
            }
        };
        let x0 = edge(self.x, width);
        let y0 = edge(self.y, height);
        let x1 = edge(self.right(), width).max(x0);
        let y1 = edge(self.bottom(), height).max(y0);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

/// Integer pixel rectangle; `x..x+w`, `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    /// Grow by `by` on every side, clamped to the image.
    pub fn expand(&self, by: u32, width: u32, height: u32) -> Rect {
        let x0 = self.x.saturating_sub(by);
        let y0 = self.y.saturating_sub(by);
        let x1 = (self.right() + by).min(width);
        let y1 = (self.bottom() + by).min(height);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.right() <= width && self.bottom() <= height
    }
}

impl core::fmt::Display for Rect {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}
