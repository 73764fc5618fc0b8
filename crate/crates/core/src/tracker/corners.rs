use crate::imgproc::{box_sum, sobel, Plane};
use crate::video_io::Frame;

use super::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Minimum response relative to the strongest corner, in `(0, 1]`.
    pub quality: f32,
    pub min_distance: f32,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            max_corners: 200,
            quality: 0.01,
            min_distance: 8.0,
        }
    }
}

/// Corners sorted by descending response.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CornerSet {
    pub points: Vec<Point2>,
    pub scores: Vec<f32>,
}

impl CornerSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Minimum eigenvalue of the 3x3-summed structure tensor at every pixel.
pub(crate) fn min_eigen_response(frame: &Plane) -> Plane {
    let (gx, gy) = sobel(frame);
    let (w, h) = frame.dims();
    // Sobel carries a factor 8.
    let n = 1.0 / 64.0;
    let xx = Plane::from_fn(w, h, |x, y| gx.get(x, y) * gx.get(x, y) * n);
    let xy = Plane::from_fn(w, h, |x, y| gx.get(x, y) * gy.get(x, y) * n);
    let yy = Plane::from_fn(w, h, |x, y| gy.get(x, y) * gy.get(x, y) * n);
    let (sxx, sxy, syy) = (box_sum(&xx, 1), box_sum(&xy, 1), box_sum(&yy, 1));
    Plane::from_fn(w, h, |x, y| {
        let a = sxx.get(x, y);
        let b = sxy.get(x, y);
        let c = syy.get(x, y);
        let half_diff = (a - c) * 0.5;
        ((a + c) * 0.5 - (half_diff * half_diff + b * b).sqrt()).max(0.0)
    })
}

/// Shi–Tomasi good-features-to-track.
///
/// Candidates are 3x3 local maxima of the minimum-eigenvalue response that
/// reach `quality` times the global maximum. They are accepted greedily in
/// descending order while keeping `min_distance` from every accepted corner.
/// Positions are refined to sub-pixel precision by a per-axis parabola fit.
pub fn detect_corners(frame: &Frame, params: &CornerParams) -> CornerSet {
    let (w, h) = frame.dims();
    if w < 3 || h < 3 || params.max_corners == 0 {
        return CornerSet::default();
    }
    let resp = min_eigen_response(frame.plane());
    let global_max = resp.max();
    if global_max <= 1e-12 {
        return CornerSet::default();
    }
    let threshold = params.quality * global_max;

    let mut candidates: Vec<(f32, usize, usize)> = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = resp.get(x, y);
            if v < threshold || v <= 0.0 {
                continue;
            }
            let is_max =
                (-1isize..=1).all(|dy| (-1isize..=1).all(|dx| resp.get_clamped(x as isize + dx, y as isize + dy) <= v));
            if is_max {
                candidates.push((v, x, y));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));

    let min_d2 = params.min_distance * params.min_distance;
    let mut out = CornerSet::default();
    for (score, x, y) in candidates {
        if out.len() >= params.max_corners {
            break;
        }
        let p = refine(&resp, x, y);
        let far_enough = out.points.iter().all(|q| {
            let dx = q.x - p.x;
            let dy = q.y - p.y;
            dx * dx + dy * dy >= min_d2
        });
        if far_enough {
            out.points.push(p);
            out.scores.push(score);
        }
    }
    out
}

fn refine(resp: &Plane, x: usize, y: usize) -> Point2 {
    let offset = |l: f32, c: f32, r: f32| {
        let denom = l - 2.0 * c + r;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
        }
    };
    let c = resp.get(x, y);
    let ox = offset(resp.get(x - 1, y), c, resp.get(x + 1, y));
    let oy = offset(resp.get(x, y - 1), c, resp.get(x, y + 1));
    Point2::new(x as f32 + ox, y as f32 + oy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(tiles: usize, tile: usize) -> Frame {
        Frame::from_fn(tiles * tile, tiles * tile, |x, y| {
            if (x / tile + y / tile).is_multiple_of(2) {
                0.9
            } else {
                0.1
            }
        })
    }

    #[test]
    fn uniform_frame_has_no_corners() {
        let set = detect_corners(&Frame::filled(32, 32, 0.5), &CornerParams::default());
        assert!(set.is_empty());
    }

    #[test]
    fn checkerboard_corners_sit_on_tile_intersections() {
        let tile = 8;
        let frame = checkerboard(8, tile);
        let params = CornerParams {
            max_corners: 200,
            quality: 0.1,
            min_distance: 4.0,
        };
        let set = detect_corners(&frame, &params);
        // Oracle: interior intersections lie between pixels k*tile-1 and
        // k*tile, i.e. at k*tile - 0.5 in pixel-center coordinates.
        let grid: Vec<Point2> = (1..8)
            .flat_map(|i| (1..8).map(move |j| Point2::new((i * tile) as f32 - 0.5, (j * tile) as f32 - 0.5)))
            .collect();
        assert_eq!(set.len(), grid.len());
        for p in &set.points {
            let nearest = grid
                .iter()
                .map(|g| ((g.x - p.x).powi(2) + (g.y - p.y).powi(2)).sqrt())
                .fold(f32::INFINITY, f32::min);
            assert!(nearest <= 1.0, "corner {p:?} is {nearest} px from the grid");
        }
    }

    #[test]
    fn max_corners_caps_and_sorts() {
        let frame = checkerboard(8, 8);
        let params = CornerParams {
            max_corners: 5,
            quality: 0.01,
            min_distance: 4.0,
        };
        let set = detect_corners(&frame, &params);
        assert_eq!(set.len(), 5);
        assert!(set.scores.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn corners_respect_min_distance() {
        let frame = checkerboard(8, 8);
        let params = CornerParams {
            max_corners: 200,
            quality: 0.01,
            min_distance: 12.0,
        };
        let set = detect_corners(&frame, &params);
        for (i, a) in set.points.iter().enumerate() {
            for b in &set.points[i + 1..] {
                assert!(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() >= 12.0);
            }
        }
    }
}
