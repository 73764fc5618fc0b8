//! Synthetic monochrome infant-like videos with NNS-style bursts.
//!
//! The scene is a static textured background with a textured face. During a
//! burst a mouth-area patch is displaced vertically by a smooth bump field
//! scaled by `amplitude * sin(2π f (t - t0))`, so dense flow sees genuine
//! sub-pixel motion. Camera jitter is a bounded random walk applied to the
//! whole scene, and i.i.d. Gaussian noise is added to every pixel.

pub mod texture;

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::annotations::{write_annotations, AnnotationSet};
use crate::error::{Error, Result};
use crate::events::Event;
use crate::tracker::{write_detections, BoundingBox, Detections};
use crate::video_io::{write_sequence, Frame, FrameFormat, FrameSequence};

use texture::value_noise;

/// Minimum silence between generated bursts, seconds.
const MIN_BURST_GAP_S: f64 = 2.0;
const MAX_PLACEMENT_TRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum BurstPlan {
    /// Explicit burst start times, seconds.
    Starts(Vec<f64>),
    /// Bursts per minute, placed at random.
    RatePerMinute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub face: BoundingBox,
    pub suck_hz: f64,
    pub amplitude_px: f64,
    pub sucks_min: usize,
    pub sucks_max: usize,
    pub bursts: BurstPlan,
    /// Step standard deviation of the jitter random walk, pixels.
    pub jitter_std: f64,
    /// The walk is reflected into `[-jitter_bound, jitter_bound]`.
    pub jitter_bound: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub subject: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            fps: 10.0,
            width: 128,
            height: 128,
            face: BoundingBox {
                x: 32.0,
                y: 32.0,
                w: 64.0,
                h: 64.0,
            },
            suck_hz: 2.0,
            amplitude_px: 2.0,
            sucks_min: 6,
            sucks_max: 12,
            bursts: BurstPlan::RatePerMinute(3.0),
            jitter_std: 0.3,
            jitter_bound: 5.0,
            noise_std: 0.01,
            seed: 0,
            subject: "synth".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Burst {
    pub start_s: f64,
    pub sucks: usize,
    pub end_s: f64,
}

/// A rendered clip with everything the generator knows about it.
#[derive(Debug, Clone)]
pub struct SynthVideo {
    pub frames: FrameSequence,
    pub annotations: AnnotationSet,
    pub bursts: Vec<Burst>,
    /// Ground-truth face box per frame (moves with the jitter).
    pub face_boxes: Vec<BoundingBox>,
    pub jitter: Vec<[f32; 2]>,
}

impl SynthSpec {
    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if !(self.duration_s > 0.0 && self.fps > 0.0) || self.frame_count() == 0 {
            return bad(format!(
                "duration {} s at {} fps gives no frames",
                self.duration_s, self.fps
            ));
        }
        if !(self.suck_hz > 0.0 && self.suck_hz < self.fps / 2.0) {
            return bad(format!(
                "suck frequency {} Hz must be positive and below Nyquist ({} Hz)",
                self.suck_hz,
                self.fps / 2.0
            ));
        }
        if self.amplitude_px < 0.0 || self.jitter_std < 0.0 || self.jitter_bound < 0.0 || self.noise_std < 0.0 {
            return bad("amplitude, jitter and noise must be non-negative".into());
        }
        if self.sucks_min == 0 || self.sucks_min > self.sucks_max {
            return bad(format!("invalid sucks range {}..={}", self.sucks_min, self.sucks_max));
        }
        if self.width < 16 || self.height < 16 || !self.face.inside_frame(self.width, self.height) {
            return bad(format!(
                "face box {} must lie inside the {}x{} frame",
                self.face, self.width, self.height
            ));
        }
        if let BurstPlan::RatePerMinute(r) = self.bursts {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("burst rate must be non-negative, got {r}"));
            }
        }
        Ok(())
    }

    fn plan_bursts(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Burst>> {
        let draw_sucks = |rng: &mut ChaCha8Rng| rng.random_range(self.sucks_min..=self.sucks_max);
        let mut bursts = match &self.bursts {
            BurstPlan::Starts(starts) => {
                let mut out = Vec::with_capacity(starts.len());
                for &start_s in starts {
                    let sucks = draw_sucks(rng);
                    let end_s = start_s + sucks as f64 / self.suck_hz;
                    if start_s < 0.0 || end_s > self.duration_s + 1e-9 {
                        return Err(Error::invalid(format!(
                            "burst [{start_s}, {end_s}) falls outside the {} s clip",
                            self.duration_s
                        )));
                    }
                    out.push(Burst { start_s, sucks, end_s });
                }
                out
            }
            BurstPlan::RatePerMinute(rate) => {
                let wanted = (rate * self.duration_s / 60.0).round() as usize;
                let mut out: Vec<Burst> = Vec::with_capacity(wanted);
                let mut tries = 0;
                while out.len() < wanted && tries < MAX_PLACEMENT_TRIES {
                    tries += 1;
                    let sucks = draw_sucks(rng);
                    let len = sucks as f64 / self.suck_hz;
                    let latest = self.duration_s - len - 0.5;
                    if latest <= 0.5 {
                        continue;
                    }
                    let start_s = (rng.random_range(0.5..latest) * 10.0).round() / 10.0;
                    let end_s = start_s + len;
                    let clear = out
                        .iter()
                        .all(|b| end_s + MIN_BURST_GAP_S <= b.start_s || start_s >= b.end_s + MIN_BURST_GAP_S);
                    if clear {
                        out.push(Burst { start_s, sucks, end_s });
                    }
                }
                out
            }
        };
        bursts.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for pair in bursts.windows(2) {
            if pair[1].start_s < pair[0].end_s {
                return Err(Error::invalid(format!(
                    "bursts starting at {} s and {} s overlap",
                    pair[0].start_s, pair[1].start_s
                )));
            }
        }
        Ok(bursts)
    }

    /// Vertical mouth displacement (pixels) at time `t`.
    fn mouth_offset(&self, bursts: &[Burst], t: f64) -> f32 {
        bursts
            .iter()
            .find(|b| t >= b.start_s && t <= b.end_s)
            .map(|b| {
                let phase = 2.0 * std::f64::consts::PI * self.suck_hz * (t - b.start_s);
                (self.amplitude_px * phase.sin()) as f32
            })
            .unwrap_or(0.0)
    }
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Scene {
    face: BoundingBox,
    bg_seed: u64,
    face_seed: u64,
    mouth_seed: u64,
}

impl Scene {
    fn mouth_center(&self) -> (f32, f32) {
        (self.face.x + 0.5 * self.face.w, self.face.y + 0.72 * self.face.h)
    }

    fn mouth_radii(&self) -> (f32, f32) {
        (0.22 * self.face.w, 0.12 * self.face.h)
    }

    /// Static scene brightness at world coordinates.
    fn base(&self, x: f32, y: f32) -> f32 {
        let bg = 0.15 + 0.5 * value_noise(x, y, self.bg_seed, 9.0);
        let c = self.face.center();
        let r_face = ellipse_radius(x - c.x, y - c.y, 0.5 * self.face.w, 0.5 * self.face.h);
        let face_mask = soft_mask(r_face, 0.12);
        if face_mask <= 0.0 {
            return bg;
        }
        let skin = 0.35 + 0.45 * value_noise(x, y, self.face_seed, 5.0);
        let (mx, my) = self.mouth_center();
        let (rx, ry) = self.mouth_radii();
        let mouth_mask = soft_mask(ellipse_radius(x - mx, y - my, rx, ry), 0.3);
        let mouth = 0.08 + 0.55 * value_noise(x, y, self.mouth_seed, 3.0);
        let face = skin * (1.0 - mouth_mask) + mouth * mouth_mask;
        bg * (1.0 - face_mask) + face * face_mask
    }

    /// Weight of the mouth displacement field; 1 at the mouth center,
    /// falling smoothly to 0.
    fn bump(&self, x: f32, y: f32) -> f32 {
        let (mx, my) = self.mouth_center();
        let (rx, ry) = self.mouth_radii();
        let r = ellipse_radius(x - mx, y - my, 1.6 * rx, 1.8 * ry);
        if r >= 1.0 {
            0.0
        } else {
            let c = (std::f32::consts::FRAC_PI_2 * r).cos();
            c * c
        }
    }
}

fn ellipse_radius(dx: f32, dy: f32, rx: f32, ry: f32) -> f32 {
    ((dx / rx).powi(2) + (dy / ry).powi(2)).sqrt()
}

/// 1 inside the unit radius, 0 beyond `1 + soft`, smooth in between.
fn soft_mask(r: f32, soft: f32) -> f32 {
    let t = ((1.0 + soft - r) / soft).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Renders the clip described by `spec`.
pub fn generate_video(spec: &SynthSpec) -> Result<SynthVideo> {
    spec.validate()?;
    let mut burst_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let bursts = spec.plan_bursts(&mut burst_rng)?;

    let n = spec.frame_count();
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2));
    let step = Normal::new(0.0, spec.jitter_std.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let bound = spec.jitter_bound;
    let mut jitter = Vec::with_capacity(n);
    let mut pos = [0.0f64, 0.0];
    for k in 0..n {
        if k > 0 && spec.jitter_std > 0.0 {
            for p in pos.iter_mut() {
                *p += step.sample(&mut jitter_rng);
                // reflect into [-bound, bound]
                for _ in 0..4 {
                    if *p > bound {
                        *p = 2.0 * bound - *p;
                    } else if *p < -bound {
                        *p = -2.0 * bound - *p;
                    }
                }
                *p = p.clamp(-bound, bound);
            }
        }
        jitter.push([pos[0] as f32, pos[1] as f32]);
    }

    let scene = Scene {
        face: spec.face,
        bg_seed: derive_seed(spec.seed, 10),
        face_seed: derive_seed(spec.seed, 11),
        mouth_seed: derive_seed(spec.seed, 12),
    };
    let noise = Normal::new(0.0f32, spec.noise_std as f32).map_err(|e| Error::invalid(e.to_string()))?;

    let frames: Vec<Frame> = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / spec.fps;
            let offset = spec.mouth_offset(&bursts, t);
            let [jx, jy] = jitter[k];
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1000 + k as u64));
            Frame::from_fn(spec.width, spec.height, |x, y| {
                let wx = x as f32 - jx;
                let wy = y as f32 - jy;
                let dy = if offset != 0.0 {
                    offset * scene.bump(wx, wy)
                } else {
                    0.0
                };
                let v = scene.base(wx, wy - dy);
                if spec.noise_std > 0.0 {
                    v + noise.sample(&mut rng)
                } else {
                    v
                }
            })
        })
        .collect();

    let events = bursts
        .iter()
        .map(|b| Event::nns(b.start_s, b.end_s))
        .collect::<Result<Vec<_>>>()?;
    let annotations = AnnotationSet::new(spec.subject.clone(), "synth", spec.duration_s, events)?;
    let face_boxes = jitter.iter().map(|j| spec.face.translated(j[0], j[1])).collect();
    Ok(SynthVideo {
        frames: FrameSequence::new(frames, spec.fps)?,
        annotations,
        bursts,
        face_boxes,
        jitter,
    })
}

/// Writes `frames/`, `annotations.csv` and a frame-0 `detections.csv`.
pub fn write_synth_output(video: &SynthVideo, dir: &Path, comment: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_sequence(&video.frames, &dir.join("frames"), FrameFormat::Pgm)?;
    write_annotations(&dir.join("annotations.csv"), &video.annotations, comment)?;
    let det = Detections::from([(0, video.face_boxes[0])]);
    write_detections(&dir.join("detections.csv"), &det, comment)
}

pub const SPEC_KEYS: &[&str] = &[
    "duration_s",
    "fps",
    "width",
    "height",
    "face",
    "suck_hz",
    "amplitude_px",
    "sucks_min",
    "sucks_max",
    "bursts",
    "burst_rate_per_min",
    "jitter_std",
    "jitter_bound",
    "noise_std",
    "seed",
    "subject",
];

/// Parses a flat `key=value` spec; unlisted keys keep their defaults.
pub fn parse_spec(text: &str, path: &Path) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i + 1, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let err = |m: &str| Error::parse(path, i + 1, format!("{key}: {m}"));
        let f = |v: &str| v.parse::<f64>().map_err(|_| err("expected a number"));
        let u = |v: &str| v.parse::<usize>().map_err(|_| err("expected an integer"));
        match key {
            "duration_s" => spec.duration_s = f(value)?,
            "fps" => spec.fps = f(value)?,
            "width" => spec.width = u(value)?,
            "height" => spec.height = u(value)?,
            "face" => {
                let v: Vec<f32> = value
                    .split(',')
                    .map(|s| s.trim().parse::<f32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err("expected x,y,w,h"))?;
                if v.len() != 4 {
                    return Err(err("expected x,y,w,h"));
                }
                spec.face = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| err(&e.to_string()))?;
            }
            "suck_hz" => spec.suck_hz = f(value)?,
            "amplitude_px" => spec.amplitude_px = f(value)?,
            "sucks_min" => spec.sucks_min = u(value)?,
            "sucks_max" => spec.sucks_max = u(value)?,
            "bursts" => {
                let starts = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|s| f(s.trim())).collect::<Result<Vec<_>>>()?
                };
                spec.bursts = BurstPlan::Starts(starts);
            }
            "burst_rate_per_min" => spec.bursts = BurstPlan::RatePerMinute(f(value)?),
            "jitter_std" => spec.jitter_std = f(value)?,
            "jitter_bound" => spec.jitter_bound = f(value)?,
            "noise_std" => spec.noise_std = f(value)?,
            "seed" => spec.seed = value.parse().map_err(|_| err("expected an integer"))?,
            "subject" => spec.subject = value.to_string(),
            _ => return Err(err("unknown key")),
        }
    }
    Ok(spec)
}

pub fn format_spec(spec: &SynthSpec) -> String {
    let bursts = match &spec.bursts {
        BurstPlan::Starts(s) => format!(
            "bursts={}",
            s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        ),
        BurstPlan::RatePerMinute(r) => format!("burst_rate_per_min={r}"),
    };
    let b = spec.face;
    format!(
        "duration_s={}\nfps={}\nwidth={}\nheight={}\nface={},{},{},{}\nsuck_hz={}\namplitude_px={}\nsucks_min={}\nsucks_max={}\n{bursts}\njitter_std={}\njitter_bound={}\nnoise_std={}\nseed={}\nsubject={}\n",
        spec.duration_s,
        spec.fps,
        spec.width,
        spec.height,
        b.x,
        b.y,
        b.w,
        b.h,
        spec.suck_hz,
        spec.amplitude_px,
        spec.sucks_min,
        spec.sucks_max,
        spec.jitter_std,
        spec.jitter_bound,
        spec.noise_std,
        spec.seed,
        spec.subject
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(bursts: BurstPlan) -> SynthSpec {
        SynthSpec {
            duration_s: 45.0,
            width: 64,
            height: 64,
            face: BoundingBox::new(12.0, 12.0, 40.0, 40.0).unwrap(),
            bursts,
            sucks_min: 8,
            sucks_max: 8,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn explicit_bursts_become_events() {
        let v = generate_video(&small(BurstPlan::Starts(vec![10.0, 30.0]))).unwrap();
        let ev = v.annotations.nns_events();
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].start_s, ev[0].end_s), (10.0, 14.0));
        assert_eq!((ev[1].start_s, ev[1].end_s), (30.0, 34.0));
        assert_eq!(v.frames.len(), 450);
    }

    #[test]
    fn same_seed_same_video() {
        let spec = SynthSpec {
            duration_s: 5.0,
            ..small(BurstPlan::RatePerMinute(12.0))
        };
        let a = generate_video(&spec).unwrap();
        let b = generate_video(&spec).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.annotations, b.annotations);
    }

    #[test]
    fn rejects_nyquist_violation_and_out_of_range_bursts() {
        let mut spec = small(BurstPlan::Starts(vec![10.0]));
        spec.suck_hz = 5.0;
        assert!(generate_video(&spec).is_err());
        let spec = small(BurstPlan::Starts(vec![43.0]));
        assert!(generate_video(&spec).is_err());
    }

    #[test]
    fn rate_plan_keeps_gaps() {
        let spec = SynthSpec {
            duration_s: 120.0,
            ..small(BurstPlan::RatePerMinute(4.0))
        };
        let v = generate_video(&spec).unwrap();
        assert_eq!(v.bursts.len(), 8);
        for w in v.bursts.windows(2) {
            assert!(w[1].start_s >= w[0].end_s + MIN_BURST_GAP_S);
        }
    }

    #[test]
    fn jitter_stays_bounded() {
        let spec = SynthSpec {
            duration_s: 30.0,
            jitter_std: 2.0,
            jitter_bound: 5.0,
            ..small(BurstPlan::Starts(vec![]))
        };
        let v = generate_video(&spec).unwrap();
        assert!(v.jitter.iter().all(|j| j[0].abs() <= 5.0 && j[1].abs() <= 5.0));
        assert_eq!(v.jitter[0], [0.0, 0.0]);
    }

    #[test]
    fn spec_text_round_trip() {
        let spec = small(BurstPlan::Starts(vec![1.5, 20.0]));
        let parsed = parse_spec(&format_spec(&spec), Path::new("s.txt")).unwrap();
        assert_eq!(parsed, spec);
        assert!(parse_spec("colour=red\n", Path::new("s.txt")).is_err());
    }
}
