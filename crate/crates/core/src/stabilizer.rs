//! Translation-only stabilization of the face crop, plus clip-level
//! training augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imgproc::{crop_resize, Plane};
use crate::tracker::{detect_corners, lk_track, BoundingBox, CornerParams, LkParams, Point2};
use crate::video_io::{Frame, FrameSequence};

/// Cumulative per-frame content offset in pixels; the first entry is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub offsets: Vec<[f32; 2]>,
}

impl Trajectory {
    pub fn zeros(n: usize) -> Self {
        Self {
            offsets: vec![[0.0, 0.0]; n],
        }
    }

    /// Cumulative sum of per-pair displacements, starting at the origin.
    pub fn from_steps(steps: &[[f32; 2]]) -> Self {
        let mut offsets = Vec::with_capacity(steps.len() + 1);
        let mut acc = [0.0f32, 0.0];
        offsets.push(acc);
        for s in steps {
            acc = [acc[0] + s[0], acc[1] + s[1]];
            offsets.push(acc);
        }
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Root of the summed per-axis variances.
    pub fn std(&self) -> f32 {
        let n = self.offsets.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let mut var = 0.0;
        for axis in 0..2 {
            let mean = self.offsets.iter().map(|o| o[axis] as f64).sum::<f64>() / n;
            var += self
                .offsets
                .iter()
                .map(|o| (o[axis] as f64 - mean).powi(2))
                .sum::<f64>()
                / n;
        }
        var.sqrt() as f32
    }
}

/// Per-frame face boxes together with the camera trajectory used to
/// stabilize them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTrack {
    pub boxes: Vec<BoundingBox>,
    pub raw: Trajectory,
    pub smoothed: Trajectory,
    /// Moving-average length (frames) the trajectory was smoothed with.
    pub smooth_window: usize,
}

impl BoxTrack {
    /// Boxes with an identity trajectory.
    pub fn from_boxes(boxes: Vec<BoundingBox>) -> Self {
        let n = boxes.len();
        Self {
            boxes,
            raw: Trajectory::zeros(n),
            smoothed: Trajectory::zeros(n),
            smooth_window: 1,
        }
    }

    /// Attaches an estimated trajectory and its moving-average smoothing.
    pub fn with_trajectory(mut self, raw: Trajectory, window_s: f64, fps: f64) -> Result<Self> {
        if raw.len() != self.boxes.len() {
            return Err(Error::invalid(format!(
                "trajectory has {} entries for {} boxes",
                raw.len(),
                self.boxes.len()
            )));
        }
        self.smooth_window = smoothing_window_frames(window_s, fps)?;
        self.smoothed = moving_average_traj(&raw, self.smooth_window);
        self.raw = raw;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Crop boxes before margin and clamping.
    ///
    /// The box track is smoothed in the coordinate frame that moves with
    /// the raw trajectory: `smooth(box - raw) + raw`. Since the smoothing is
    /// linear this equals the smoothed boxes displaced by the
    /// high-frequency part `raw - smoothed` of the trajectory, so the crop
    /// follows fine jitter exactly while tracker noise on the boxes is
    /// averaged out.
    pub fn stabilized_boxes(&self) -> Vec<BoundingBox> {
        let rel: Vec<[f32; 2]> = self
            .boxes
            .iter()
            .zip(&self.raw.offsets)
            .map(|(b, r)| [b.x - r[0], b.y - r[1]])
            .collect();
        let smooth_rel = moving_average(&rel, self.smooth_window);
        self.boxes
            .iter()
            .zip(smooth_rel.iter().zip(&self.raw.offsets))
            .map(|(b, (s, r))| BoundingBox {
                x: s[0] + r[0],
                y: s[1] + r[1],
                ..*b
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub corners: CornerParams,
    pub lk: LkParams,
    /// Corners are re-detected once fewer than this many survive tracking.
    pub min_valid: usize,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            corners: CornerParams::default(),
            lk: LkParams::default(),
            min_valid: 20,
        }
    }
}

/// Camera trajectory from the median displacement of LK-tracked corners.
///
/// A frame pair without any valid corner repeats the previous displacement.
pub fn estimate_trajectory(seq: &FrameSequence, params: &TrajectoryParams) -> Result<Trajectory> {
    if seq.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: seq.len(),
        });
    }
    let frames = seq.frames();
    let mut points: Vec<Point2> = detect_corners(&frames[0], &params.corners).points;
    let mut steps = Vec::with_capacity(seq.len() - 1);
    let mut last = [0.0f32, 0.0];
    for i in 0..frames.len() - 1 {
        if points.len() < params.min_valid {
            points = detect_corners(&frames[i], &params.corners).points;
        }
        let res = lk_track(&frames[i], &frames[i + 1], &points, &params.lk)?;
        let mut dxs = Vec::with_capacity(points.len());
        let mut dys = Vec::with_capacity(points.len());
        let mut survivors = Vec::with_capacity(points.len());
        for ((p, q), &ok) in points.iter().zip(&res.points).zip(&res.status) {
            if ok {
                dxs.push(q.x - p.x);
                dys.push(q.y - p.y);
                survivors.push(*q);
            }
        }
        let step = if dxs.is_empty() {
            last
        } else {
            [median(&mut dxs), median(&mut dys)]
        };
        steps.push(step);
        last = step;
        points = survivors;
    }
    Ok(Trajectory::from_steps(&steps))
}

pub(crate) fn median(values: &mut [f32]) -> f32 {
    values.sort_by(f32::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `round(window_s * fps)` frames, bumped to the next odd count.
pub fn smoothing_window_frames(window_s: f64, fps: f64) -> Result<usize> {
    if !(window_s > 0.0 && window_s.is_finite()) {
        return Err(Error::invalid(format!(
            "smoothing window must be positive, got {window_s}"
        )));
    }
    let n = ((window_s * fps).round() as usize).max(1);
    Ok(if n.is_multiple_of(2) { n + 1 } else { n })
}

/// Centered moving average; near the ends only the available entries are
/// averaged.
pub fn smooth_trajectory(traj: &Trajectory, window_s: f64, fps: f64) -> Result<Trajectory> {
    let window = smoothing_window_frames(window_s, fps)?;
    Ok(moving_average_traj(traj, window))
}

fn moving_average_traj(traj: &Trajectory, window: usize) -> Trajectory {
    Trajectory {
        offsets: moving_average(&traj.offsets, window),
    }
}

fn moving_average(values: &[[f32; 2]], window: usize) -> Vec<[f32; 2]> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let count = (hi - lo + 1) as f64;
            let (sx, sy) = values[lo..=hi]
                .iter()
                .fold((0.0f64, 0.0f64), |(ax, ay), v| (ax + v[0] as f64, ay + v[1] as f64));
            [(sx / count) as f32, (sy / count) as f32]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropParams {
    /// Fraction of the box size added on each side.
    pub margin: f32,
    pub out_size: usize,
}

impl Default for CropParams {
    fn default() -> Self {
        Self {
            margin: 0.1,
            out_size: 112,
        }
    }
}

/// Crops every frame to its stabilized face box and resizes it to
/// `out_size x out_size`.
pub fn stabilized_crop(seq: &FrameSequence, track: &BoxTrack, params: &CropParams) -> Result<FrameSequence> {
    if params.out_size < 8 {
        return Err(Error::invalid(format!(
            "crop size must be at least 8, got {}",
            params.out_size
        )));
    }
    if track.len() != seq.len() {
        return Err(Error::invalid(format!(
            "box track has {} frames, sequence has {}",
            track.len(),
            seq.len()
        )));
    }
    let (w, h) = (seq.width(), seq.height());
    let frames = seq
        .frames()
        .iter()
        .zip(track.stabilized_boxes())
        .map(|(frame, b)| {
            let b = b.expanded(params.margin).clamped(w, h);
            Frame::from_plane(crop_resize(
                frame.plane(),
                b.x,
                b.y,
                b.w,
                b.h,
                params.out_size,
                params.out_size,
            ))
        })
        .collect();
    FrameSequence::new(frames, seq.fps())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Maximum absolute rotation, degrees.
    pub rotation_deg: f32,
    /// Scale factors are drawn from `[1 - scale_range, 1 + scale_range]`.
    pub scale_range: f32,
    pub flip_prob: f32,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            rotation_deg: 15.0,
            scale_range: 0.1,
            flip_prob: 0.5,
            seed: 0,
        }
    }
}

/// The transform drawn for one clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub angle_deg: f32,
    pub scale: f32,
    pub flip: bool,
}

impl AugmentParams {
    fn validate(&self) -> Result<()> {
        let ok = self.rotation_deg >= 0.0
            && self.scale_range >= 0.0
            && self.scale_range < 1.0
            && (0.0..=1.0).contains(&self.flip_prob);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid augmentation parameters {self:?}")))
        }
    }

    pub fn draw(&self) -> Result<AugmentDraw> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let u_angle: f32 = rng.random();
        let u_scale: f32 = rng.random();
        let u_flip: f32 = rng.random();
        Ok(AugmentDraw {
            angle_deg: (2.0 * u_angle - 1.0) * self.rotation_deg,
            scale: 1.0 + (2.0 * u_scale - 1.0) * self.scale_range,
            flip: u_flip < self.flip_prob,
        })
    }
}

/// Applies one seeded rotation/scale/flip to every frame of the clip.
pub fn augment(seq: &FrameSequence, params: &AugmentParams) -> Result<FrameSequence> {
    let draw = params.draw()?;
    let frames = seq.frames().iter().map(|f| apply_draw(f, &draw)).collect();
    FrameSequence::new(frames, seq.fps())
}

fn apply_draw(frame: &Frame, draw: &AugmentDraw) -> Frame {
    let flipped = if draw.flip {
        frame.flip_horizontal()
    } else {
        frame.clone()
    };
    if draw.angle_deg == 0.0 && draw.scale == 1.0 {
        return flipped;
    }
    let src = flipped.plane();
    let (w, h) = src.dims();
    let cx = (w as f32 - 1.0) / 2.0;
    let cy = (h as f32 - 1.0) / 2.0;
    let (sin, cos) = draw.angle_deg.to_radians().sin_cos();
    let inv = 1.0 / draw.scale;
    // Inverse map: output pixel -> source position.
    Frame::from_plane(Plane::from_fn(w, h, |x, y| {
        let dx = x as f32 - cx;
        let dy = y as f32 - cy;
        let sx = cx + inv * (cos * dx + sin * dy);
        let sy = cy + inv * (-sin * dx + cos * dy);
        src.sample(sx, sy)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::value_noise;

    fn traj(xs: &[f32]) -> Trajectory {
        Trajectory {
            offsets: xs.iter().map(|&x| [x, -x]).collect(),
        }
    }

    fn textured_seq(shifts: &[[f32; 2]]) -> FrameSequence {
        let frames = shifts
            .iter()
            .map(|s| Frame::from_fn(96, 96, |x, y| value_noise(x as f32 - s[0], y as f32 - s[1], 21, 6.0)))
            .collect();
        FrameSequence::new(frames, 10.0).unwrap()
    }

    #[test]
    fn hand_moving_average() {
        // window_s * fps = 0.3 * 10 = 3 frames.
        let out = smooth_trajectory(&traj(&[0.0, 2.0, 0.0, 2.0, 0.0]), 0.3, 10.0).unwrap();
        let xs: Vec<f32> = out.offsets.iter().map(|o| o[0]).collect();
        let expected = [1.0, 2.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in xs.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{xs:?}");
        }
        assert!(out.offsets.iter().all(|o| o[0] == -o[1]));
    }

    #[test]
    fn constant_trajectory_is_unchanged() {
        let t = traj(&[1.5; 9]);
        assert_eq!(smooth_trajectory(&t, 0.5, 10.0).unwrap(), t);
    }

    #[test]
    fn overlong_window_gives_global_mean() {
        let t = traj(&[0.0, 1.0, 2.0, 3.0, 10.0]);
        let out = smooth_trajectory(&t, 100.0, 10.0).unwrap();
        assert!(out.offsets.iter().all(|o| (o[0] - 3.2).abs() < 1e-6));
    }

    #[test]
    fn even_windows_become_odd() {
        assert_eq!(smoothing_window_frames(1.5, 10.0).unwrap(), 15);
        assert_eq!(smoothing_window_frames(0.4, 10.0).unwrap(), 5);
        assert!(smoothing_window_frames(0.0, 10.0).is_err());
    }

    #[test]
    fn static_video_has_flat_trajectory() {
        let seq = textured_seq(&[[0.0, 0.0]; 6]);
        let t = estimate_trajectory(&seq, &TrajectoryParams::default()).unwrap();
        assert_eq!(t.offsets[0], [0.0, 0.0]);
        assert!(t.offsets.iter().all(|o| o[0].abs() < 0.1 && o[1].abs() < 0.1));
    }

    #[test]
    fn constant_pan_accumulates() {
        let shifts: Vec<[f32; 2]> = (0..10).map(|i| [i as f32, 0.0]).collect();
        let t = estimate_trajectory(&textured_seq(&shifts), &TrajectoryParams::default()).unwrap();
        let last = t.offsets[9];
        assert!((last[0] - 9.0).abs() <= 0.3 && last[1].abs() <= 0.3, "{last:?}");
    }

    #[test]
    fn alternating_jitter_oscillates() {
        let shifts: Vec<[f32; 2]> = (0..8).map(|i| [if i % 2 == 0 { 0.0 } else { 2.0 }, 0.0]).collect();
        let t = estimate_trajectory(&textured_seq(&shifts), &TrajectoryParams::default()).unwrap();
        for (o, s) in t.offsets.iter().zip(&shifts) {
            assert!((o[0] - s[0]).abs() < 0.3, "{:?}", t.offsets);
        }
    }

    #[test]
    fn single_frame_is_rejected() {
        let seq = textured_seq(&[[0.0, 0.0]]);
        assert!(matches!(
            estimate_trajectory(&seq, &TrajectoryParams::default()),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn zero_jitter_crop_is_plain_crop() {
        let seq = textured_seq(&[[0.0, 0.0]; 3]);
        let b = BoundingBox::new(20.0, 16.0, 40.0, 40.0).unwrap();
        let track = BoxTrack::from_boxes(vec![b; 3]);
        let out = stabilized_crop(
            &seq,
            &track,
            &CropParams {
                margin: 0.0,
                out_size: 40,
            },
        )
        .unwrap();
        for (o, f) in out.frames().iter().zip(seq.frames()) {
            let plain = Frame::from_plane(crop_resize(f.plane(), 20.0, 16.0, 40.0, 40.0, 40, 40));
            assert_eq!(o, &plain);
            assert_eq!(o.get(0, 0), f.get(20, 16));
        }
    }

    #[test]
    fn clamped_crop_keeps_output_size() {
        let seq = textured_seq(&[[0.0, 0.0]; 2]);
        let b = BoundingBox::new(70.0, -10.0, 50.0, 50.0).unwrap();
        let track = BoxTrack::from_boxes(vec![b; 2]);
        let out = stabilized_crop(
            &seq,
            &track,
            &CropParams {
                margin: 0.1,
                out_size: 32,
            },
        )
        .unwrap();
        assert_eq!((out.width(), out.height()), (32, 32));
        assert!(stabilized_crop(
            &seq,
            &track,
            &CropParams {
                margin: 0.1,
                out_size: 4
            }
        )
        .is_err());
    }

    #[test]
    fn identity_augmentation() {
        let seq = textured_seq(&[[0.0, 0.0], [1.0, 0.0]]);
        let p = AugmentParams {
            rotation_deg: 0.0,
            scale_range: 0.0,
            flip_prob: 0.0,
            seed: 4,
        };
        assert_eq!(augment(&seq, &p).unwrap(), seq);
    }

    #[test]
    fn flip_is_an_involution() {
        let seq = textured_seq(&[[0.0, 0.0], [1.0, 2.0]]);
        let p = AugmentParams {
            rotation_deg: 0.0,
            scale_range: 0.0,
            flip_prob: 1.0,
            seed: 4,
        };
        let once = augment(&seq, &p).unwrap();
        assert_ne!(once, seq);
        assert_eq!(once.frames()[0].get(0, 5), seq.frames()[0].get(95, 5));
        assert_eq!(augment(&once, &p).unwrap(), seq);
    }

    #[test]
    fn augmentation_is_seeded() {
        let seq = textured_seq(&[[0.0, 0.0], [1.0, 2.0]]);
        let p = AugmentParams {
            seed: 99,
            ..AugmentParams::default()
        };
        let a = augment(&seq, &p).unwrap();
        let b = augment(&seq, &p).unwrap();
        assert_eq!(a, b);
        let d = p.draw().unwrap();
        assert!(d.angle_deg.abs() <= 15.0 && (0.9..=1.1).contains(&d.scale));
    }

    #[test]
    fn invalid_augmentation_rejected() {
        let seq = textured_seq(&[[0.0, 0.0]]);
        let p = AugmentParams {
            flip_prob: 1.5,
            ..AugmentParams::default()
        };
        assert!(augment(&seq, &p).is_err());
    }
}
