//! Dense optical flow by polynomial expansion and its HSV encoding.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgproc::{convolve_separable, gaussian_blur, gaussian_kernel, resize, Plane};
use crate::video_io::{read_meta_fps, Frame, FrameSequence, META_FILE};

pub const MIN_FLOW_SIZE: usize = 16;
const FLO_MAGIC: &[u8; 4] = b"PIEH";
// Intensities are expanded on a 0..255 scale; this keeps the normal
// equations well away from the f32 noise floor.
const INTENSITY_SCALE: f32 = 255.0;
const DET_EPS: f32 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    pub levels: usize,
    pub pyr_scale: f32,
    /// Side of the Gaussian aggregation window, pixels (odd).
    pub window: usize,
    pub iterations: usize,
    /// Side of the polynomial-expansion neighborhood (odd).
    pub poly_n: usize,
    pub poly_sigma: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 3,
            pyr_scale: 0.5,
            window: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.iterations == 0 {
            return Err(Error::invalid("flow needs at least one level and one iteration"));
        }
        if !(self.pyr_scale > 0.0 && self.pyr_scale < 1.0) {
            return Err(Error::invalid(format!(
                "pyramid scale {} outside (0, 1)",
                self.pyr_scale
            )));
        }
        if self.window < 3 || self.window.is_multiple_of(2) || self.poly_n < 3 || self.poly_n.is_multiple_of(2) {
            return Err(Error::invalid("flow window and poly_n must be odd and at least 3"));
        }
        if self.poly_sigma <= 0.0 {
            return Err(Error::invalid("poly_sigma must be positive"));
        }
        Ok(())
    }
}

/// Per-pixel displacement from one frame to the next, pixels/frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub u: Plane,
    pub v: Plane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Plane::zeros(width, height),
            v: Plane::zeros(width, height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.u.dims()
    }

    pub fn magnitude(&self) -> Plane {
        let (w, h) = self.dims();
        Plane::from_fn(w, h, |x, y| self.u.get(x, y).hypot(self.v.get(x, y)))
    }

    pub fn scaled(&self, k: f32) -> FlowField {
        FlowField {
            u: self.u.map(|a| a * k),
            v: self.v.map(|a| a * k),
        }
    }
}

/// Channels in `[0, 1]`. `scale` is the magnitude that maps to value 1,
/// so `value * scale` recovers the flow magnitude (up to clipping).
#[derive(Debug, Clone, PartialEq)]
pub struct HsvFrame {
    pub hue: Plane,
    pub saturation: Plane,
    pub value: Plane,
    pub scale: f32,
}

impl HsvFrame {
    pub fn dims(&self) -> (usize, usize) {
        self.hue.dims()
    }

    /// Interleaved 8-bit RGB for viewing.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.hue.data().len() * 3);
        for ((&h, &s), &v) in self
            .hue
            .data()
            .iter()
            .zip(self.saturation.data())
            .zip(self.value.data())
        {
            let [r, g, b] = hsv_to_rgb(h, s, v);
            out.extend([r, g, b].map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8));
        }
        out
    }
}

fn hsv_to_rgb(h: f32, s: f32, v: f32) -> [f32; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u8 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HsvNorm {
    PerFrame,
    Fixed(f32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSequence {
    pub fields: Vec<FlowField>,
    pub hsv_frames: Vec<HsvFrame>,
}

impl FlowSequence {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Coefficients of the local model `c + b·d + dᵀ A d`, one plane each.
struct PolyExpansion {
    bx: Plane,
    by: Plane,
    axx: Plane,
    ayy: Plane,
    axy: Plane,
}

/// Weighted least-squares filters for the basis `1, x, y, x², y², xy`
/// under a Gaussian applicability. Returns one `n x n` tap set per
/// coefficient except the constant.
fn expansion_filters(n: usize, sigma: f32) -> [Vec<f64>; 5] {
    let r = (n / 2) as isize;
    let offsets: Vec<(f64, f64, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx as f64, dy as f64)))
        .map(|(dx, dy)| {
            let w = (-(dx * dx + dy * dy) / (2.0 * (sigma as f64).powi(2))).exp();
            (dx, dy, w)
        })
        .collect();
    let basis = |dx: f64, dy: f64| [1.0, dx, dy, dx * dx, dy * dy, dx * dy];
    let mut gram = [[0.0f64; 6]; 6];
    for &(dx, dy, w) in &offsets {
        let b = basis(dx, dy);
        for i in 0..6 {
            for j in 0..6 {
                gram[i][j] += w * b[i] * b[j];
            }
        }
    }
    let inv = invert6(gram);
    let mut out: [Vec<f64>; 5] = Default::default();
    for (k, taps) in out.iter_mut().enumerate() {
        let row = inv[k + 1];
        *taps = offsets
            .iter()
            .map(|&(dx, dy, w)| {
                let b = basis(dx, dy);
                w * (0..6).map(|j| row[j] * b[j]).sum::<f64>()
            })
            .collect();
    }
    out
}

fn invert6(mut m: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut inv = [[0.0; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..6 {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..6 {
            if r != col {
                let f = m[r][col];
                for j in 0..6 {
                    m[r][j] -= f * m[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    inv
}

fn poly_expand(img: &Plane, n: usize, filters: &[Vec<f64>; 5]) -> PolyExpansion {
    let (w, h) = img.dims();
    let r = (n / 2) as isize;
    let mut planes: [Plane; 5] = std::array::from_fn(|_| Plane::zeros(w, h));
    let mut patch = vec![0.0f32; n * n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut i = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    patch[i] = img.get_clamped(x + dx, y + dy);
                    i += 1;
                }
            }
            for (plane, taps) in planes.iter_mut().zip(filters) {
                let acc: f64 = taps.iter().zip(&patch).map(|(&t, &p)| t * p as f64).sum();
                plane.set(x as usize, y as usize, acc as f32);
            }
        }
    }
    let [bx, by, axx, ayy, axy] = planes;
    PolyExpansion { bx, by, axx, ayy, axy }
}

fn check_pair(prev: &Frame, next: &Frame) -> Result<()> {
    if prev.dims() != next.dims() {
        return Err(Error::SizeMismatch(prev.dims(), next.dims()));
    }
    let (w, h) = prev.dims();
    if w < MIN_FLOW_SIZE || h < MIN_FLOW_SIZE {
        return Err(Error::FrameTooSmall {
            width: w,
            height: h,
            min: MIN_FLOW_SIZE,
        });
    }
    Ok(())
}

fn pyramid(img: &Plane, params: &FlowParams) -> Vec<Plane> {
    let (w, h) = img.dims();
    let mut out = vec![img.clone()];
    for k in 1..params.levels {
        let s = params.pyr_scale.powi(k as i32);
        let lw = (w as f32 * s).round() as usize;
        let lh = (h as f32 * s).round() as usize;
        if lw < params.poly_n * 2 || lh < params.poly_n * 2 {
            break;
        }
        let sigma = (1.0 / s - 1.0) * 0.5;
        out.push(resize(&gaussian_blur(img, sigma), lw, lh));
    }
    out
}

/// Polynomial-expansion dense flow, coarse to fine.
pub fn dense_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    check_pair(prev, next)?;
    params.validate()?;
    let scale = |p: &Plane| p.map(|v| v * INTENSITY_SCALE);
    let pyr1 = pyramid(&scale(prev.plane()), params);
    let pyr2 = pyramid(&scale(next.plane()), params);
    let filters = expansion_filters(params.poly_n, params.poly_sigma);
    let win_sigma = 0.3 * (params.window / 2) as f32;
    let win = gaussian_kernel(win_sigma.max(0.5), params.window / 2);

    let mut flow: Option<FlowField> = None;
    for level in (0..pyr1.len()).rev() {
        let (w, h) = pyr1[level].dims();
        let mut f = match flow.take() {
            None => FlowField::zeros(w, h),
            Some(coarse) => {
                let up = 1.0 / params.pyr_scale;
                FlowField {
                    u: resize(&coarse.u, w, h).map(|a| a * up),
                    v: resize(&coarse.v, w, h).map(|a| a * up),
                }
            }
        };
        let r1 = poly_expand(&pyr1[level], params.poly_n, &filters);
        let r2 = poly_expand(&pyr2[level], params.poly_n, &filters);
        for _ in 0..params.iterations {
            f = refine(&r1, &r2, &f, &win);
        }
        flow = Some(f);
    }
    Ok(flow.expect("at least one level"))
}

fn refine(r1: &PolyExpansion, r2: &PolyExpansion, flow: &FlowField, win: &[f32]) -> FlowField {
    let (w, h) = flow.dims();
    let mut g: [Plane; 5] = std::array::from_fn(|_| Plane::zeros(w, h));
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (flow.u.get(x, y), flow.v.get(x, y));
            let (sx, sy) = (x as f32 + dx, y as f32 + dy);
            let a11 = 0.5 * (r1.axx.get(x, y) + r2.axx.sample(sx, sy));
            let a22 = 0.5 * (r1.ayy.get(x, y) + r2.ayy.sample(sx, sy));
            let a12 = 0.25 * (r1.axy.get(x, y) + r2.axy.sample(sx, sy));
            let b1 = -0.5 * (r2.bx.sample(sx, sy) - r1.bx.get(x, y)) + a11 * dx + a12 * dy;
            let b2 = -0.5 * (r2.by.sample(sx, sy) - r1.by.get(x, y)) + a12 * dx + a22 * dy;
            g[0].set(x, y, a11 * a11 + a12 * a12);
            g[1].set(x, y, a12 * (a11 + a22));
            g[2].set(x, y, a12 * a12 + a22 * a22);
            g[3].set(x, y, a11 * b1 + a12 * b2);
            g[4].set(x, y, a12 * b1 + a22 * b2);
        }
    }
    let g: Vec<Plane> = g.iter().map(|p| convolve_separable(p, win, win)).collect();
    let mut out = FlowField::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let (g11, g12, g22, h1, h2) = (
                g[0].get(x, y),
                g[1].get(x, y),
                g[2].get(x, y),
                g[3].get(x, y),
                g[4].get(x, y),
            );
            let idet = 1.0 / (g11 * g22 - g12 * g12 + DET_EPS);
            out.u.set(x, y, (g22 * h1 - g12 * h2) * idet);
            out.v.set(x, y, (g11 * h2 - g12 * h1) * idet);
        }
    }
    out
}

/// Direction to hue, magnitude to value, saturation 1.
pub fn flow_to_hsv(flow: &FlowField, norm: HsvNorm) -> Result<HsvFrame> {
    let mag = flow.magnitude();
    if mag.data().iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("flow field has non-finite values"));
    }
    let denom = match norm {
        HsvNorm::PerFrame => mag.max(),
        HsvNorm::Fixed(m) if m > 0.0 => m,
        HsvNorm::Fixed(m) => return Err(Error::invalid(format!("fixed flow scale must be positive, got {m}"))),
    };
    let (w, h) = flow.dims();
    let mut hue = Plane::zeros(w, h);
    let mut value = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let m = mag.get(x, y);
            if m > 0.0 && denom > 0.0 {
                let a = flow.v.get(x, y).atan2(flow.u.get(x, y)) / std::f32::consts::TAU;
                let hv = if a < 0.0 { a + 1.0 } else { a };
                hue.set(x, y, if hv >= 1.0 { 0.0 } else { hv });
                value.set(x, y, (m / denom).min(1.0));
            }
        }
    }
    Ok(HsvFrame {
        hue,
        saturation: Plane::filled(w, h, 1.0),
        value,
        scale: denom,
    })
}

/// Flow and its HSV rendering for every adjacent frame pair.
pub fn clip_flow_encode(seq: &FrameSequence, params: &FlowParams, norm: HsvNorm) -> Result<FlowSequence> {
    if seq.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: seq.len(),
        });
    }
    let frames = seq.frames();
    let pairs: Vec<(FlowField, HsvFrame)> = (0..frames.len() - 1)
        .into_par_iter()
        .map(|i| {
            let f = dense_flow(&frames[i], &frames[i + 1], params)?;
            let hsv = flow_to_hsv(&f, norm)?;
            Ok((f, hsv))
        })
        .collect::<Result<_>>()?;
    let (fields, hsv_frames) = pairs.into_iter().unzip();
    Ok(FlowSequence { fields, hsv_frames })
}

/// Writes a `.flo` file: `PIEH`, width and height as little-endian i32,
/// then interleaved `u, v` as little-endian f32, row-major.
pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    let (w, h) = flow.dims();
    let mut buf = Vec::with_capacity(12 + w * h * 8);
    buf.extend_from_slice(FLO_MAGIC);
    buf.extend_from_slice(&(w as i32).to_le_bytes());
    buf.extend_from_slice(&(h as i32).to_le_bytes());
    for (u, v) in flow.u.data().iter().zip(flow.v.data()) {
        buf.extend_from_slice(&u.to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Decode {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if buf.len() < 12 || &buf[0..4] != FLO_MAGIC {
        return Err(bad("missing PIEH header"));
    }
    let w = i32::from_le_bytes(buf[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(buf[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(bad("non-positive dimensions"));
    }
    let (w, h) = (w as usize, h as usize);
    if buf.len() != 12 + w * h * 8 {
        return Err(bad("payload length does not match dimensions"));
    }
    let vals: Vec<f32> = buf[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let u = vals.iter().step_by(2).copied().collect();
    let v = vals.iter().skip(1).step_by(2).copied().collect();
    Ok(FlowField {
        u: Plane::new(w, h, u),
        v: Plane::new(w, h, v),
    })
}

pub fn flo_file_name(index: usize) -> String {
    format!("flow_{index:06}.flo")
}

pub fn hsv_file_name(index: usize) -> String {
    format!("hsv_{index:06}.png")
}

/// Writes a flow directory: one `.flo` per field, an RGB preview of each
/// HSV frame, and `meta.txt` with the frame rate of the source video.
pub fn write_flow_dir(dir: &Path, flow: &FlowSequence, fps: f64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    flow.fields
        .par_iter()
        .zip(&flow.hsv_frames)
        .enumerate()
        .try_for_each(|(i, (field, hsv))| {
            write_flo(&dir.join(flo_file_name(i)), field)?;
            let path = dir.join(hsv_file_name(i));
            let (w, h) = hsv.dims();
            let img = image::RgbImage::from_raw(w as u32, h as u32, hsv.to_rgb8()).expect("buffer matches frame size");
            img.save(&path).map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(&path, io),
                other => Error::Decode {
                    path: path.clone(),
                    message: other.to_string(),
                },
            })
        })?;
    let meta = dir.join(META_FILE);
    fs::write(&meta, format!("fps={fps}\n")).map_err(|e| Error::io(&meta, e))
}

/// Reads the `.flo` fields of a flow directory and re-encodes them with
/// `norm`. Returns the sequence and the frame rate (`meta.txt`, else
/// `declared_fps`).
pub fn load_flow_dir(dir: &Path, declared_fps: f64, norm: HsvNorm) -> Result<(FlowSequence, f64)> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indices = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let index = name
            .to_str()
            .and_then(|n| n.strip_prefix("flow_"))
            .and_then(|n| n.strip_suffix(".flo"))
            .filter(|d| d.len() >= 6 && d.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|d| d.parse::<usize>().ok());
        if let Some(i) = index {
            indices.push(i);
        }
    }
    if indices.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    indices.sort_unstable();
    for (expected, &found) in indices.iter().enumerate() {
        if found != expected {
            return Err(Error::NonContiguous { expected, found });
        }
    }
    let meta = dir.join(META_FILE);
    let fps = if meta.is_file() {
        read_meta_fps(&meta)?
    } else {
        declared_fps
    };
    let pairs: Vec<(FlowField, HsvFrame)> = indices
        .par_iter()
        .map(|&i| {
            let f = read_flo(&dir.join(flo_file_name(i)))?;
            let hsv = flow_to_hsv(&f, norm)?;
            Ok((f, hsv))
        })
        .collect::<Result<_>>()?;
    let dims = pairs[0].0.dims();
    if let Some(i) = pairs.iter().position(|(f, _)| f.dims() != dims) {
        return Err(Error::MixedDimensions {
            index: i,
            expected: dims,
            found: pairs[i].0.dims(),
        });
    }
    let (fields, hsv_frames) = pairs.into_iter().unzip();
    Ok((FlowSequence { fields, hsv_frames }, fps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::value_noise;

    fn textured(dx: f32, dy: f32) -> Frame {
        Frame::from_fn(64, 64, |x, y| value_noise(x as f32 - dx, y as f32 - dy, 11, 6.0))
    }

    fn interior_median(p: &Plane) -> f32 {
        let (w, h) = p.dims();
        let mut v: Vec<f32> = (8..h - 8)
            .flat_map(|y| (8..w - 8).map(move |x| (x, y)))
            .map(|(x, y)| p.get(x, y))
            .collect();
        v.sort_by(f32::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn identity_frames_give_zero_flow() {
        let f = textured(0.0, 0.0);
        let flow = dense_flow(&f, &f, &FlowParams::default()).unwrap();
        assert!(flow.magnitude().max() <= 0.05);
    }

    #[test]
    fn recovers_two_pixel_shift() {
        let flow = dense_flow(&textured(0.0, 0.0), &textured(2.0, 0.0), &FlowParams::default()).unwrap();
        let (mu, mv) = (interior_median(&flow.u), interior_median(&flow.v));
        assert!((mu - 2.0).abs() < 0.25 && mv.abs() < 0.25, "({mu}, {mv})");
    }

    #[test]
    fn rejects_bad_pairs() {
        let a = Frame::filled(32, 32, 0.5);
        let b = Frame::filled(32, 20, 0.5);
        assert!(matches!(
            dense_flow(&a, &b, &FlowParams::default()),
            Err(Error::SizeMismatch(..))
        ));
        let c = Frame::filled(12, 12, 0.5);
        assert!(matches!(
            dense_flow(&c, &c, &FlowParams::default()),
            Err(Error::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn hsv_conventions() {
        let zero = FlowField::zeros(4, 4);
        let hsv = flow_to_hsv(&zero, HsvNorm::PerFrame).unwrap();
        assert!(hsv.value.data().iter().all(|&v| v == 0.0));
        assert!(hsv.hue.data().iter().all(|&v| v == 0.0));

        let right = FlowField {
            u: Plane::filled(4, 4, 0.7),
            v: Plane::zeros(4, 4),
        };
        let hsv = flow_to_hsv(&right, HsvNorm::PerFrame).unwrap();
        assert!(hsv.hue.data().iter().all(|&v| v == 0.0));
        assert!(hsv.value.data().iter().all(|&v| (v - 1.0).abs() < 1e-6));

        let down = FlowField {
            u: Plane::zeros(4, 4),
            v: Plane::filled(4, 4, 0.7),
        };
        let hsv = flow_to_hsv(&down, HsvNorm::PerFrame).unwrap();
        assert!(hsv.hue.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
        assert!(hsv.saturation.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn fixed_norm_clips_and_validates() {
        let f = FlowField {
            u: Plane::from_fn(2, 1, |x, _| if x == 0 { 1.0 } else { 4.0 }),
            v: Plane::zeros(2, 1),
        };
        let hsv = flow_to_hsv(&f, HsvNorm::Fixed(2.0)).unwrap();
        assert_eq!(hsv.value.data(), &[0.5, 1.0]);
        assert!(flow_to_hsv(&f, HsvNorm::Fixed(0.0)).is_err());
    }

    #[test]
    fn window_of_26_gives_25_fields() {
        let frames: Vec<Frame> = (0..26).map(|_| Frame::filled(16, 16, 0.3)).collect();
        let seq = FrameSequence::new(frames, 10.0).unwrap();
        let out = clip_flow_encode(&seq, &FlowParams::default(), HsvNorm::PerFrame).unwrap();
        assert_eq!(out.len(), 25);
        assert_eq!(out.hsv_frames.len(), 25);
        assert!(out.hsv_frames[0].value.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.flo");
        let f = FlowField {
            u: Plane::from_fn(3, 2, |x, y| x as f32 - y as f32 * 0.5),
            v: Plane::from_fn(3, 2, |x, y| (x * y) as f32 + 0.25),
        };
        write_flo(&path, &f).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"PIEH");
        assert_eq!(bytes.len(), 12 + 3 * 2 * 8);
        assert_eq!(read_flo(&path).unwrap(), f);
    }

    #[test]
    fn flow_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..4)
            .map(|t| {
                Frame::from_fn(24, 20, move |x, y| {
                    ((x as f32 + t as f32) * 0.4).sin() * 0.3 + (y as f32 * 0.3).cos() * 0.2 + 0.5
                })
            })
            .collect();
        let seq = FrameSequence::new(frames, 10.0).unwrap();
        let flow = clip_flow_encode(&seq, &FlowParams::default(), HsvNorm::PerFrame).unwrap();
        write_flow_dir(dir.path(), &flow, 10.0).unwrap();
        assert!(dir.path().join("hsv_000002.png").is_file());
        let (back, fps) = load_flow_dir(dir.path(), 25.0, HsvNorm::PerFrame).unwrap();
        assert_eq!(fps, 10.0);
        assert_eq!(back, flow);
    }
}
