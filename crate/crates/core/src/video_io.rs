//! Frame sequences and the on-disk image-sequence format.
//!
//! A clip on disk is a directory of `frame_%06d.pgm` (or `.png`) files,
//! numbered from 0, plus an optional `meta.txt` holding `fps=<decimal>`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imgproc::Plane;

/// Luminance weights applied to color inputs.
pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

pub const META_FILE: &str = "meta.txt";

/// A grayscale image with every pixel in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    plane: Plane,
}

impl Frame {
    /// Wraps a plane, clamping values into `[0, 1]`. NaN becomes 0.
    pub fn from_plane(plane: Plane) -> Self {
        let plane = plane.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
        Self { plane }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::from_plane(Plane::filled(width, height, value))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f32) -> Self {
        Self::from_plane(Plane::from_fn(width, height, f))
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.plane.get(x, y)
    }

    pub fn flip_horizontal(&self) -> Frame {
        Frame {
            plane: self.plane.flip_horizontal(),
        }
    }

    /// 8-bit quantization used by the file formats.
    pub fn to_u8(&self) -> Vec<u8> {
        self.plane.data().iter().map(|&v| (v * 255.0).round() as u8).collect()
    }
}

/// Ordered frames of identical size sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let first = frames.first().ok_or_else(|| Error::invalid("empty frame sequence"))?;
        let expected = first.dims();
        for (index, f) in frames.iter().enumerate() {
            if f.dims() != expected {
                return Err(Error::MixedDimensions {
                    index,
                    expected,
                    found: f.dims(),
                });
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    /// Frame count over rate; each frame owns one sampling period, so a
    /// single frame at 10 Hz lasts 0.1 s and 600 frames last 60 s.
    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.fps
    }

    /// Time between the first and last frame (26 frames at 10 Hz span 2.5 s).
    pub fn span_s(&self) -> f64 {
        (self.frames.len() - 1) as f64 / self.fps
    }

    /// Frames `[start, end)` as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<FrameSequence> {
        if start >= end || end > self.frames.len() {
            return Err(Error::invalid(format!(
                "frame range {start}..{end} outside 0..{}",
                self.frames.len()
            )));
        }
        FrameSequence::new(self.frames[start..end].to_vec(), self.fps)
    }
}

/// Image format used by [`write_sequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameFormat {
    Pgm,
    Png,
}

impl FrameFormat {
    fn extension(self) -> &'static str {
        match self {
            FrameFormat::Pgm => "pgm",
            FrameFormat::Png => "png",
        }
    }
}

pub fn frame_file_name(index: usize, format: FrameFormat) -> String {
    format!("frame_{index:06}.{}", format.extension())
}

/// Parses `frame_<digits>.<pgm|png>` into its index.
fn parse_frame_name(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("frame_")?;
    let (digits, ext) = rest.split_once('.')?;
    if !matches!(ext.to_ascii_lowercase().as_str(), "pgm" | "png") {
        return None;
    }
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Reads the `fps=` line of a metadata file.
pub fn read_meta_fps(path: &Path) -> Result<f64> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value = line
            .strip_prefix("fps=")
            .ok_or_else(|| Error::parse(path, i + 1, "expected `fps=<decimal>`"))?;
        let fps: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad fps value `{value}`")))?;
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::parse(path, i + 1, "fps must be positive"));
        }
        return Ok(fps);
    }
    Err(Error::parse(path, 1, "missing fps line"))
}

/// Loads an image-sequence directory.
///
/// The frame rate comes from `meta.txt` when present, otherwise from
/// `declared_fps`.
pub fn load_sequence(dir: &Path, declared_fps: f64) -> Result<FrameSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(usize, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(index) = name.to_str().and_then(parse_frame_name) {
            files.push((index, entry.path()));
        }
    }
    if files.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    files.sort();
    for (expected, (found, _)) in files.iter().enumerate() {
        if *found != expected {
            return Err(Error::NonContiguous {
                expected,
                found: *found,
            });
        }
    }

    let meta = dir.join(META_FILE);
    let fps = if meta.is_file() {
        read_meta_fps(&meta)?
    } else {
        declared_fps
    };

    let mut frames = Vec::with_capacity(files.len());
    for (_, path) in &files {
        let frame = read_frame(path)?;
        if let Some(first) = frames.first() {
            let first: &Frame = first;
            if first.dims() != frame.dims() {
                return Err(Error::MixedDimensions {
                    index: frames.len(),
                    expected: first.dims(),
                    found: frame.dims(),
                });
            }
        }
        frames.push(frame);
    }
    FrameSequence::new(frames, fps)
}

/// Writes frames and `meta.txt` into `dir`, creating it if needed.
pub fn write_sequence(seq: &FrameSequence, dir: &Path, format: FrameFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(frame_file_name(i, format));
        match format {
            FrameFormat::Pgm => write_pgm(&path, frame)?,
            FrameFormat::Png => write_png_gray(&path, frame)?,
        }
    }
    let meta = dir.join(META_FILE);
    fs::write(&meta, format!("fps={}\n", seq.fps())).map_err(|e| Error::io(&meta, e))
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    let is_pgm = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        read_pgm(path)
    } else {
        read_png(path)
    }
}

fn read_png(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = match img {
        image::DynamicImage::ImageLuma8(buf) => {
            Plane::new(w, h, buf.into_raw().into_iter().map(|v| v as f32 / 255.0).collect())
        }
        image::DynamicImage::ImageLuma16(buf) => {
            Plane::new(w, h, buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect())
        }
        other => {
            let rgb = other.to_rgb32f();
            Plane::new(
                w,
                h,
                rgb.pixels()
                    .map(|p| LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2])
                    .collect(),
            )
        }
    };
    Ok(Frame::from_plane(plane))
}

fn write_png_gray(path: &Path, frame: &Frame) -> Result<()> {
    let buf = image::GrayImage::from_raw(frame.width() as u32, frame.height() as u32, frame.to_u8())
        .expect("buffer matches frame size");
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// Reads binary (P5) or ASCII (P2) PGM with 8- or 16-bit samples.
pub fn read_pgm(path: &Path) -> Result<Frame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Decode {
        path: path.to_path_buf(),
        message: msg.to_string(),
    };

    // Header: magic, width, height, maxval, separated by whitespace and
    // optional `#` comments.
    let mut pos = 0;
    let mut tokens: Vec<String> = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let magic = tokens[0].as_str();
    let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let width = parse(&tokens[1])?;
    let height = parse(&tokens[2])?;
    let maxval = parse(&tokens[3])?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("bad header values"));
    }
    let n = width * height;
    let scale = maxval as f32;

    let data: Vec<f32> = match magic {
        "P5" => {
            pos += 1; // single whitespace after maxval
            let body = bytes.get(pos..).unwrap_or(&[]);
            if maxval < 256 {
                if body.len() < n {
                    return Err(bad("truncated pixel data"));
                }
                body[..n].iter().map(|&v| v as f32 / scale).collect()
            } else {
                if body.len() < 2 * n {
                    return Err(bad("truncated pixel data"));
                }
                body[..2 * n]
                    .chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / scale)
                    .collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let values: Vec<f32> = text
                .split_ascii_whitespace()
                .take(n)
                .map(|t| t.parse::<u32>().map(|v| v as f32 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad ASCII sample"))?;
            if values.len() < n {
                return Err(bad("truncated pixel data"));
            }
            values
        }
        _ => return Err(bad("not a grayscale PGM (expected P5 or P2)")),
    };
    Ok(Frame::from_plane(Plane::new(width, height, data)))
}

pub fn write_pgm(path: &Path, frame: &Frame) -> Result<()> {
    let mut out = Vec::with_capacity(frame.width() * frame.height() + 32);
    write!(out, "P5\n{} {}\n255\n", frame.width(), frame.height()).expect("vec write");
    out.extend_from_slice(&frame.to_u8());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Nearest-frame temporal downsampling.
///
/// Output frame `k` sits at `k / target_fps` and copies the source frame
/// whose timestamp is nearest (half-way ties round up). The output holds
/// `round(n * target_fps / fps)` frames.
pub fn resample_fps(seq: &FrameSequence, target_fps: f64) -> Result<FrameSequence> {
    if !(target_fps > 0.0 && target_fps.is_finite()) {
        return Err(Error::invalid(format!("target fps must be positive, got {target_fps}")));
    }
    if target_fps > seq.fps() {
        return Err(Error::Upsample {
            source_fps: seq.fps(),
            target_fps,
        });
    }
    let n_out = resampled_len(seq.len(), seq.fps(), target_fps);
    let frames = (0..n_out)
        .map(|k| seq.frames()[nearest_source_index(k, seq.fps(), target_fps, seq.len())].clone())
        .collect();
    FrameSequence::new(frames, target_fps)
}

pub(crate) fn resampled_len(n: usize, source_fps: f64, target_fps: f64) -> usize {
    ((n as f64 * target_fps / source_fps).round() as usize).max(1)
}

pub(crate) fn nearest_source_index(k: usize, source_fps: f64, target_fps: f64, n: usize) -> usize {
    let idx = (k as f64 * source_fps / target_fps).round() as usize;
    idx.min(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_seq(n: usize, fps: f64) -> FrameSequence {
        let frames = (0..n).map(|i| Frame::filled(4, 3, (i % 256) as f32 / 255.0)).collect();
        FrameSequence::new(frames, fps).unwrap()
    }

    fn frame_value(f: &Frame) -> usize {
        (f.get(0, 0) * 255.0).round() as usize
    }

    #[test]
    fn parses_frame_names() {
        assert_eq!(parse_frame_name("frame_000012.pgm"), Some(12));
        assert_eq!(parse_frame_name("frame_000012.PNG"), Some(12));
        assert_eq!(parse_frame_name("frame_12.pgm"), None);
        assert_eq!(parse_frame_name("frame_000012.jpg"), None);
        assert_eq!(parse_frame_name("meta.txt"), None);
    }

    #[test]
    fn resample_30_to_10_takes_every_third() {
        let out = resample_fps(&ramp_seq(90, 30.0), 10.0).unwrap();
        assert_eq!(out.len(), 30);
        assert_eq!(out.fps(), 10.0);
        for (k, f) in out.frames().iter().enumerate() {
            assert_eq!(frame_value(f), 3 * k);
        }
    }

    #[test]
    fn resample_25_to_10_rounds_half_frames() {
        let out = resample_fps(&ramp_seq(50, 25.0), 10.0).unwrap();
        // Independent oracle: nearest timestamp of k/10 on the 1/25 grid,
        // ties toward the later frame.
        let expected: Vec<usize> = (0..20)
            .map(|k| {
                // |a/25 - k/10| compared exactly as |2a - 5k| / 50
                (0..50usize)
                    .min_by(|&a, &b| {
                        let da = (2 * a as i64 - 5 * k as i64).abs();
                        let db = (2 * b as i64 - 5 * k as i64).abs();
                        da.cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap()
            })
            .collect();
        let got: Vec<usize> = out.frames().iter().map(frame_value).collect();
        assert_eq!(got, expected);
        assert_eq!(&got[..4], &[0, 3, 5, 8]);
    }

    #[test]
    fn resample_same_rate_is_identity() {
        let seq = ramp_seq(17, 12.5);
        assert_eq!(resample_fps(&seq, 12.5).unwrap(), seq);
    }

    #[test]
    fn resample_rejects_upsampling() {
        assert!(matches!(
            resample_fps(&ramp_seq(10, 10.0), 30.0),
            Err(Error::Upsample { .. })
        ));
    }

    #[test]
    fn sequence_rejects_mixed_sizes() {
        let frames = vec![Frame::filled(4, 4, 0.0), Frame::filled(5, 4, 0.0)];
        assert!(matches!(
            FrameSequence::new(frames, 10.0),
            Err(Error::MixedDimensions { index: 1, .. })
        ));
    }
}
