//! Face-box tracking: Shi–Tomasi corners, pyramidal Lucas–Kanade point
//! tracking and a MOSSE correlation-filter box tracker.

mod corners;
mod lk;
mod mosse;
mod propagate;

use std::fmt;
use std::path::Path;

pub use corners::{detect_corners, CornerParams, CornerSet};
pub use lk::{lk_track, LkParams, LkResult};
pub use mosse::{mosse_init, MosseParams, MosseState};
pub use propagate::{propagate_bbox, read_detections, write_detections, Detections};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f32,
    pub y: f32,
}

impl Point2 {
    pub const fn new(x: f32, y: f32) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned box in pixel coordinates; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f32,
    pub y: f32,
    pub w: f32,
    pub h: f32,
}

impl BoundingBox {
    pub fn new(x: f32, y: f32, w: f32, h: f32) -> Result<Self> {
        if !(w > 0.0 && h > 0.0) || ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("invalid box {x},{y},{w},{h}")));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn translated(&self, dx: f32, dy: f32) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Grows the box by `margin * size` on every side.
    pub fn expanded(&self, margin: f32) -> Self {
        let mx = self.w * margin;
        let my = self.h * margin;
        Self {
            x: self.x - mx,
            y: self.y - my,
            w: self.w + 2.0 * mx,
            h: self.h + 2.0 * my,
        }
    }

    pub fn intersects_frame(&self, width: usize, height: usize) -> bool {
        self.x < width as f32 && self.y < height as f32 && self.x + self.w > 0.0 && self.y + self.h > 0.0
    }

    pub fn inside_frame(&self, width: usize, height: usize) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.x + self.w <= width as f32 && self.y + self.h <= height as f32
    }

    /// Moves the box inside the frame. A box larger than the frame on some
    /// axis is cut to the frame extent on that axis.
    pub fn clamped(&self, width: usize, height: usize) -> Self {
        let (fw, fh) = (width as f32, height as f32);
        let w = self.w.min(fw);
        let h = self.h.min(fh);
        Self {
            x: self.x.clamp(0.0, fw - w),
            y: self.y.clamp(0.0, fh - h),
            w,
            h,
        }
    }
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

pub(crate) fn display_path(p: &Path) -> String {
    p.display().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamping_keeps_size_when_it_fits() {
        let b = BoundingBox::new(-5.0, 90.0, 20.0, 20.0).unwrap().clamped(100, 100);
        assert_eq!(b, BoundingBox::new(0.0, 80.0, 20.0, 20.0).unwrap());
        assert!(b.inside_frame(100, 100));
    }

    #[test]
    fn oversized_box_is_cut_to_frame() {
        let b = BoundingBox::new(-5.0, -5.0, 200.0, 50.0).unwrap().clamped(100, 80);
        assert_eq!((b.x, b.y, b.w, b.h), (0.0, 0.0, 100.0, 50.0));
    }

    #[test]
    fn rejects_empty_boxes() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 4.0).is_err());
    }
}
