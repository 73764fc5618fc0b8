use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex32;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::imgproc::Plane;
use crate::video_io::Frame;

use super::BoundingBox;

/// Half-width of the window around the peak excluded from the sidelobe.
const SIDELOBE_EXCLUSION: isize = 5;
const MIN_BOX_SIDE: f32 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosseParams {
    pub learning_rate: f32,
    pub regularizer: f32,
    /// Updates with a lower peak-to-sidelobe ratio hold the box and skip
    /// the filter update.
    pub psr_threshold: f32,
    /// Randomly warped copies of the first patch used at initialization.
    pub perturbations: usize,
    /// Standard deviation of the Gaussian target peak, pixels.
    pub target_sigma: f32,
    pub seed: u64,
}

impl Default for MosseParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.125,
            regularizer: 1e-5,
            psr_threshold: 8.0,
            perturbations: 8,
            target_sigma: 2.0,
            seed: 0,
        }
    }
}

struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f32>>,
    col_fwd: Arc<dyn Fft<f32>>,
    row_inv: Arc<dyn Fft<f32>>,
    col_inv: Arc<dyn Fft<f32>>,
}

impl Fft2 {
    fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn run(&self, data: &mut [Complex32], rows: &Arc<dyn Fft<f32>>, cols: &Arc<dyn Fft<f32>>) {
        let (w, h) = (self.width, self.height);
        for row in data.chunks_exact_mut(w) {
            rows.process(row);
        }
        let mut column = vec![Complex32::default(); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = data[y * w + x];
            }
            cols.process(&mut column);
            for y in 0..h {
                data[y * w + x] = column[y];
            }
        }
    }

    fn forward(&self, real: &[f32]) -> Vec<Complex32> {
        let mut data: Vec<Complex32> = real.iter().map(|&v| Complex32::new(v, 0.0)).collect();
        self.run(&mut data, &self.row_fwd, &self.col_fwd);
        data
    }

    fn inverse_real(&self, mut data: Vec<Complex32>) -> Vec<f32> {
        self.run(&mut data, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f32;
        data.into_iter().map(|c| c.re * norm).collect()
    }
}

/// MOSSE correlation-filter tracker for one target.
///
/// The filter is kept as the running numerator `A = Σ G·conj(F)` and
/// denominator `B = Σ F·conj(F)`; `H* = A / (B + ε)`.
pub struct MosseState {
    params: MosseParams,
    bbox: BoundingBox,
    frame_dims: (usize, usize),
    win_w: usize,
    win_h: usize,
    fft: Fft2,
    hann: Vec<f32>,
    target: Vec<Complex32>,
    numer: Vec<Complex32>,
    denom: Vec<Complex32>,
    filter: Vec<Complex32>,
}

impl fmt::Debug for MosseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MosseState")
            .field("bbox", &self.bbox)
            .field("window", &(self.win_w, self.win_h))
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

/// Trains a filter on the patch under `bbox` plus randomly warped copies.
pub fn mosse_init(frame: &Frame, bbox: BoundingBox, params: &MosseParams) -> Result<MosseState> {
    let (fw, fh) = frame.dims();
    if !bbox.inside_frame(fw, fh) {
        return Err(Error::BoxOutsideFrame(bbox.to_string()));
    }
    if bbox.w < MIN_BOX_SIDE || bbox.h < MIN_BOX_SIDE {
        return Err(Error::DegenerateBox { w: bbox.w, h: bbox.h });
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) || params.regularizer < 0.0 {
        return Err(Error::invalid(
            "MOSSE learning rate must be in (0, 1] and regularizer >= 0",
        ));
    }

    let win_w = bbox.w.round() as usize;
    let win_h = bbox.h.round() as usize;
    let fft = Fft2::new(win_w, win_h);
    let hann = hann_window(win_w, win_h);
    let (cx, cy) = ((win_w / 2) as f32, (win_h / 2) as f32);
    let s2 = 2.0 * params.target_sigma * params.target_sigma;
    let gauss: Vec<f32> = (0..win_h)
        .flat_map(|y| {
            (0..win_w).map(move |x| {
                let dx = x as f32 - cx;
                let dy = y as f32 - cy;
                (-(dx * dx + dy * dy) / s2).exp()
            })
        })
        .collect();
    let target = fft.forward(&gauss);

    let mut state = MosseState {
        params: *params,
        bbox,
        frame_dims: (fw, fh),
        win_w,
        win_h,
        fft,
        hann,
        target,
        numer: vec![Complex32::default(); win_w * win_h],
        denom: vec![Complex32::default(); win_w * win_h],
        filter: vec![Complex32::default(); win_w * win_h],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for k in 0..=params.perturbations {
        let (angle, scale) = if k == 0 {
            (0.0, 1.0)
        } else {
            (rng.random_range(-0.1f32..=0.1), rng.random_range(0.95f32..=1.05))
        };
        let patch = state.extract_patch(frame, &bbox, angle, scale);
        let spec = state.fft.forward(&patch);
        for (i, s) in spec.iter().enumerate() {
            state.numer[i] += state.target[i] * s.conj();
            state.denom[i] += s * s.conj();
        }
    }
    if params.regularizer == 0.0 && state.denom.iter().any(|d| d.re <= 0.0) {
        return Err(Error::DegenerateFilter);
    }
    state.refresh_filter();
    Ok(state)
}

impl MosseState {
    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    pub fn params(&self) -> &MosseParams {
        &self.params
    }

    /// Correlation response of the current filter over the window at the
    /// current box.
    pub fn response(&self, frame: &Frame) -> Plane {
        let patch = self.extract_patch(frame, &self.bbox, 0.0, 1.0);
        let spec = self.fft.forward(&patch);
        let prod: Vec<Complex32> = spec.iter().zip(&self.filter).map(|(f, h)| f * h).collect();
        Plane::new(self.win_w, self.win_h, self.fft.inverse_real(prod))
    }

    /// Locates the target in `frame`, returning the new box and the
    /// peak-to-sidelobe ratio. Below the PSR threshold the box is held and
    /// the filter is left untouched.
    pub fn update(&mut self, frame: &Frame) -> Result<(BoundingBox, f32)> {
        if frame.dims() != self.frame_dims {
            return Err(Error::SizeMismatch(self.frame_dims, frame.dims()));
        }
        let resp = self.response(frame);
        let (px, py) = argmax(&resp);
        let psr = peak_to_sidelobe(&resp, px, py);
        if psr < self.params.psr_threshold {
            return Ok((self.bbox, psr));
        }
        let (ox, oy) = subpixel_peak(&resp, px, py);
        let dx = px as f32 + ox - (self.win_w / 2) as f32;
        let dy = py as f32 + oy - (self.win_h / 2) as f32;
        let (fw, fh) = self.frame_dims;
        self.bbox = self.bbox.translated(dx, dy).clamped(fw, fh);

        let patch = self.extract_patch(frame, &self.bbox, 0.0, 1.0);
        let spec = self.fft.forward(&patch);
        let eta = self.params.learning_rate;
        for (i, s) in spec.iter().enumerate() {
            self.numer[i] = self.target[i] * s.conj() * eta + self.numer[i] * (1.0 - eta);
            self.denom[i] = s * s.conj() * eta + self.denom[i] * (1.0 - eta);
        }
        self.refresh_filter();
        Ok((self.bbox, psr))
    }

    fn refresh_filter(&mut self) {
        let eps = self.params.regularizer;
        for i in 0..self.filter.len() {
            self.filter[i] = self.numer[i] / (self.denom[i] + eps);
        }
    }

    /// Log-normalized, cosine-tapered patch, optionally rotated/scaled
    /// about the box center.
    fn extract_patch(&self, frame: &Frame, bbox: &BoundingBox, angle: f32, scale: f32) -> Vec<f32> {
        let plane = frame.plane();
        let c = bbox.center();
        let (hw, hh) = (self.win_w as f32 / 2.0, self.win_h as f32 / 2.0);
        let (sin, cos) = angle.sin_cos();
        let mut patch = Vec::with_capacity(self.win_w * self.win_h);
        for y in 0..self.win_h {
            for x in 0..self.win_w {
                let rx = x as f32 + 0.5 - hw;
                let ry = y as f32 + 0.5 - hh;
                let sx = c.x + scale * (cos * rx - sin * ry) - 0.5;
                let sy = c.y + scale * (sin * rx + cos * ry) - 0.5;
                patch.push((plane.sample(sx, sy) * 255.0 + 1.0).ln());
            }
        }
        let n = patch.len() as f32;
        let mean = patch.iter().sum::<f32>() / n;
        let var = patch.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
        let std = var.sqrt();
        for (v, w) in patch.iter_mut().zip(&self.hann) {
            *v = if std > 1e-4 { (*v - mean) / std * w } else { 0.0 };
        }
        patch
    }
}

fn hann_window(w: usize, h: usize) -> Vec<f32> {
    let hann = |i: usize, n: usize| {
        if n < 2 {
            1.0
        } else {
            0.5 - 0.5 * (2.0 * std::f32::consts::PI * i as f32 / (n - 1) as f32).cos()
        }
    };
    (0..h)
        .flat_map(|y| (0..w).map(move |x| hann(x, w) * hann(y, h)))
        .collect()
}

fn argmax(p: &Plane) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f32::NEG_INFINITY;
    for y in 0..p.height() {
        for x in 0..p.width() {
            let v = p.get(x, y);
            if v > best_v {
                best_v = v;
                best = (x, y);
            }
        }
    }
    best
}

/// `(peak - mean) / std` of the response outside an 11x11 window around the
/// peak (circular neighbourhood, matching the circular correlation).
pub(crate) fn peak_to_sidelobe(resp: &Plane, px: usize, py: usize) -> f32 {
    let (w, h) = resp.dims();
    let peak = resp.get(px, py);
    let mut sum = 0.0f64;
    let mut sum2 = 0.0f64;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let dx = circ_dist(x, px, w);
            let dy = circ_dist(y, py, h);
            if dx <= SIDELOBE_EXCLUSION && dy <= SIDELOBE_EXCLUSION {
                continue;
            }
            let v = resp.get(x, y) as f64;
            sum += v;
            sum2 += v * v;
            count += 1;
        }
    }
    if count < 2 {
        return 0.0;
    }
    let mean = sum / count as f64;
    let std = (sum2 / count as f64 - mean * mean).max(0.0).sqrt();
    if std < 1e-12 {
        return 0.0;
    }
    ((peak as f64 - mean) / std) as f32
}

fn circ_dist(a: usize, b: usize, n: usize) -> isize {
    let d = (a as isize - b as isize).rem_euclid(n as isize);
    d.min(n as isize - d)
}

fn subpixel_peak(resp: &Plane, px: usize, py: usize) -> (f32, f32) {
    let (w, h) = resp.dims();
    let at = |x: isize, y: isize| resp.get(x.rem_euclid(w as isize) as usize, y.rem_euclid(h as isize) as usize);
    let fit = |l: f32, c: f32, r: f32| {
        let d = l - 2.0 * c + r;
        if d.abs() < 1e-12 {
            0.0
        } else {
            (0.5 * (l - r) / d).clamp(-0.5, 0.5)
        }
    };
    let (x, y) = (px as isize, py as isize);
    let c = at(x, y);
    (fit(at(x - 1, y), c, at(x + 1, y)), fit(at(x, y - 1), c, at(x, y + 1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::value_noise;
    use rand_distr::{Distribution, Normal};

    fn scene(shift: (f32, f32)) -> Frame {
        Frame::from_fn(128, 128, |x, y| {
            value_noise(x as f32 - shift.0, y as f32 - shift.1, 11, 5.0)
        })
    }

    fn face_box() -> BoundingBox {
        BoundingBox::new(40.0, 40.0, 48.0, 48.0).unwrap()
    }

    #[test]
    fn self_correlation_peaks_at_center() {
        let f = scene((0.0, 0.0));
        let st = mosse_init(&f, face_box(), &MosseParams::default()).unwrap();
        let resp = st.response(&f);
        assert_eq!(argmax(&resp), (24, 24));
    }

    #[test]
    fn same_frame_keeps_box_with_high_psr() {
        let f = scene((0.0, 0.0));
        let mut st = mosse_init(&f, face_box(), &MosseParams::default()).unwrap();
        let (b, psr) = st.update(&f).unwrap();
        assert!(psr > 8.0, "psr {psr}");
        assert!((b.x - 40.0).abs() < 0.5 && (b.y - 40.0).abs() < 0.5, "{b}");
    }

    #[test]
    fn follows_translation() {
        let f0 = scene((0.0, 0.0));
        let f1 = scene((5.0, 2.0));
        let mut st = mosse_init(&f0, face_box(), &MosseParams::default()).unwrap();
        let (b, _) = st.update(&f1).unwrap();
        let c = b.center();
        let err = ((c.x - 69.0).powi(2) + (c.y - 66.0).powi(2)).sqrt();
        assert!(err <= 2.0, "center {c:?}");
    }

    #[test]
    fn noise_frame_falls_below_threshold() {
        let f = scene((0.0, 0.0));
        let mut st = mosse_init(&f, face_box(), &MosseParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Frame::from_fn(128, 128, |_, _| rng.random::<f32>());
        let (b, psr) = st.update(&noise).unwrap();
        assert!(psr < 8.0, "psr {psr}");
        assert_eq!(b, face_box());
    }

    #[test]
    fn noise_patch_initializes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noise = Frame::from_fn(64, 64, |_, _| rng.random::<f32>());
        assert!(mosse_init(
            &noise,
            BoundingBox::new(10.0, 10.0, 32.0, 32.0).unwrap(),
            &MosseParams::default()
        )
        .is_ok());
    }

    #[test]
    fn zero_energy_patch_without_regularizer_is_degenerate() {
        let flat = Frame::filled(64, 64, 0.4);
        let params = MosseParams {
            regularizer: 0.0,
            ..MosseParams::default()
        };
        let bbox = BoundingBox::new(10.0, 10.0, 32.0, 32.0).unwrap();
        assert!(matches!(mosse_init(&flat, bbox, &params), Err(Error::DegenerateFilter)));
        assert!(mosse_init(&flat, bbox, &MosseParams::default()).is_ok());
    }

    #[test]
    fn rejects_bad_boxes() {
        let f = scene((0.0, 0.0));
        let outside = BoundingBox::new(120.0, 120.0, 32.0, 32.0).unwrap();
        assert!(matches!(
            mosse_init(&f, outside, &MosseParams::default()),
            Err(Error::BoxOutsideFrame(_))
        ));
        let tiny = BoundingBox::new(10.0, 10.0, 6.0, 20.0).unwrap();
        assert!(matches!(
            mosse_init(&f, tiny, &MosseParams::default()),
            Err(Error::DegenerateBox { .. })
        ));
    }

    #[test]
    fn psr_decreases_with_noise_amplitude() {
        let base = scene((0.0, 0.0));
        let st = mosse_init(&base, face_box(), &MosseParams::default()).unwrap();
        let amplitudes = [0.0f32, 0.1, 0.2, 0.4, 0.8];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut means = Vec::new();
        for &a in &amplitudes {
            let normal = Normal::new(0.0f32, 1.0).unwrap();
            let mut total = 0.0;
            for _ in 0..30 {
                let noisy = Frame::from_fn(128, 128, |x, y| base.get(x, y) + a * normal.sample(&mut rng));
                let resp = st.response(&noisy);
                let (px, py) = argmax(&resp);
                total += peak_to_sidelobe(&resp, px, py);
            }
            means.push(total / 30.0);
        }
        assert!(means.windows(2).all(|w| w[0] > w[1]), "{means:?}");
    }
}
