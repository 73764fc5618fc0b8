use crate::error::{Error, Result};
use crate::imgproc::{build_pyramid, scharr, Plane};
use crate::video_io::Frame;

use super::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Number of pyramid levels, including full resolution.
    pub levels: usize,
    /// Odd integration window side in pixels.
    pub window: usize,
    pub iterations: usize,
    /// Stop iterating once the update is shorter than this (pixels).
    pub epsilon: f32,
    /// Minimum eigenvalue of the window-averaged structure tensor.
    pub min_eigen: f32,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            levels: 3,
            window: 15,
            iterations: 10,
            epsilon: 0.01,
            min_eigen: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LkResult {
    pub points: Vec<Point2>,
    pub status: Vec<bool>,
}

impl LkResult {
    pub fn valid_count(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }
}

struct Level {
    prev: Plane,
    next: Plane,
    gx: Plane,
    gy: Plane,
}

/// Pyramidal Lucas–Kanade tracking of `points` from `prev` into `next`.
///
/// Each level solves the windowed brightness-constancy least-squares system
/// by Gauss–Newton iteration, seeding the next finer level with twice the
/// estimate. A point fails when its full-resolution structure tensor is
/// near-singular or when it leaves the frame.
pub fn lk_track(prev: &Frame, next: &Frame, points: &[Point2], params: &LkParams) -> Result<LkResult> {
    if prev.dims() != next.dims() {
        return Err(Error::SizeMismatch(prev.dims(), next.dims()));
    }
    if params.window < 3 || params.window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "LK window must be odd and at least 3, got {}",
            params.window
        )));
    }
    let min_size = params.window / 2 + 1;
    let prev_pyr = build_pyramid(prev.plane(), params.levels.max(1), min_size);
    let next_pyr = build_pyramid(next.plane(), prev_pyr.len(), min_size);
    let levels: Vec<Level> = prev_pyr
        .into_iter()
        .zip(next_pyr)
        .map(|(p, n)| {
            let (gx, gy) = scharr(&p);
            Level {
                prev: p,
                next: n,
                gx,
                gy,
            }
        })
        .collect();

    let (w, h) = prev.dims();
    let mut result = LkResult::default();
    for &pt in points {
        let (tracked, ok) = track_point(&levels, pt, params);
        let inside = tracked.x >= 0.0
            && tracked.y >= 0.0
            && tracked.x <= (w - 1) as f32
            && tracked.y <= (h - 1) as f32
            && tracked.x.is_finite()
            && tracked.y.is_finite();
        result.points.push(tracked);
        result.status.push(ok && inside);
    }
    Ok(result)
}

fn track_point(levels: &[Level], pt: Point2, params: &LkParams) -> (Point2, bool) {
    let half = (params.window / 2) as isize;
    let n = (params.window * params.window) as f32;
    let mut guess = (0.0f32, 0.0f32);
    let mut status = true;
    let mut ix = Vec::with_capacity(params.window * params.window);
    let mut iy = Vec::with_capacity(params.window * params.window);
    let mut tmpl = Vec::with_capacity(params.window * params.window);

    for (lvl, level) in levels.iter().enumerate().rev() {
        let scale = 1.0 / (1u32 << lvl) as f32;
        let px = pt.x * scale;
        let py = pt.y * scale;

        ix.clear();
        iy.clear();
        tmpl.clear();
        let (mut gxx, mut gxy, mut gyy) = (0.0f32, 0.0f32, 0.0f32);
        for dy in -half..=half {
            for dx in -half..=half {
                let sx = px + dx as f32;
                let sy = py + dy as f32;
                let gx = level.gx.sample(sx, sy);
                let gy = level.gy.sample(sx, sy);
                gxx += gx * gx;
                gxy += gx * gy;
                gyy += gy * gy;
                ix.push(gx);
                iy.push(gy);
                tmpl.push(level.prev.sample(sx, sy));
            }
        }
        let half_diff = (gxx - gyy) * 0.5;
        let min_eig = ((gxx + gyy) * 0.5 - (half_diff * half_diff + gxy * gxy).sqrt()) / n;
        let det = gxx * gyy - gxy * gxy;
        if min_eig < params.min_eigen || det.abs() < f32::EPSILON {
            if lvl == 0 {
                status = false;
            }
            if lvl > 0 {
                guess = (guess.0 * 2.0, guess.1 * 2.0);
            }
            continue;
        }

        let mut d = (0.0f32, 0.0f32);
        for _ in 0..params.iterations {
            let (mut bx, mut by) = (0.0f32, 0.0f32);
            let mut k = 0;
            for dy in -half..=half {
                for dx in -half..=half {
                    let sx = px + guess.0 + d.0 + dx as f32;
                    let sy = py + guess.1 + d.1 + dy as f32;
                    let diff = tmpl[k] - level.next.sample(sx, sy);
                    bx += ix[k] * diff;
                    by += iy[k] * diff;
                    k += 1;
                }
            }
            let step_x = (gyy * bx - gxy * by) / det;
            let step_y = (gxx * by - gxy * bx) / det;
            d.0 += step_x;
            d.1 += step_y;
            if step_x * step_x + step_y * step_y < params.epsilon * params.epsilon {
                break;
            }
        }
        guess = (guess.0 + d.0, guess.1 + d.1);
        if lvl > 0 {
            guess = (guess.0 * 2.0, guess.1 * 2.0);
        }
    }
    (Point2::new(pt.x + guess.0, pt.y + guess.1), status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::value_noise;

    fn textured(w: usize, h: usize, shift: (f32, f32)) -> Frame {
        Frame::from_fn(w, h, |x, y| value_noise(x as f32 - shift.0, y as f32 - shift.1, 7, 6.0))
    }

    fn grid_points(w: usize, h: usize, margin: usize, step: usize) -> Vec<Point2> {
        let mut pts = Vec::new();
        for y in (margin..h - margin).step_by(step) {
            for x in (margin..w - margin).step_by(step) {
                pts.push(Point2::new(x as f32, y as f32));
            }
        }
        pts
    }

    #[test]
    fn identical_frames_track_in_place() {
        let f = textured(64, 64, (0.0, 0.0));
        let pts = grid_points(64, 64, 12, 8);
        let res = lk_track(&f, &f, &pts, &LkParams::default()).unwrap();
        for (p, (q, ok)) in pts.iter().zip(res.points.iter().zip(&res.status)) {
            assert!(ok);
            assert!((p.x - q.x).abs() < 1e-4 && (p.y - q.y).abs() < 1e-4);
        }
    }

    #[test]
    fn recovers_integer_shift() {
        let a = textured(96, 96, (0.0, 0.0));
        let b = textured(96, 96, (3.0, 0.0));
        let pts = grid_points(96, 96, 20, 8);
        let res = lk_track(&a, &b, &pts, &LkParams::default()).unwrap();
        for (p, (q, ok)) in pts.iter().zip(res.points.iter().zip(&res.status)) {
            assert!(ok);
            assert!((q.x - p.x - 3.0).abs() <= 0.2, "dx = {}", q.x - p.x);
            assert!((q.y - p.y).abs() <= 0.2, "dy = {}", q.y - p.y);
        }
    }

    #[test]
    fn flat_region_is_rejected() {
        // Texture only on the left third; the probe sits far inside the
        // flat part even at the coarsest level.
        let f = Frame::from_fn(160, 64, |x, y| {
            if x < 40 {
                value_noise(x as f32, y as f32, 3, 6.0)
            } else {
                0.5
            }
        });
        let res = lk_track(&f, &f, &[Point2::new(120.0, 32.0)], &LkParams::default()).unwrap();
        assert_eq!(res.status, vec![false]);
    }

    #[test]
    fn mismatched_sizes_error() {
        let a = Frame::filled(32, 32, 0.0);
        let b = Frame::filled(32, 30, 0.0);
        assert!(matches!(
            lk_track(&a, &b, &[], &LkParams::default()),
            Err(Error::SizeMismatch(..))
        ));
    }
}
