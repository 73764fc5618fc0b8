//! Window scoring: score-file replay, ONNX inference, and a spectral
//! logistic-regression baseline.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::data_lines;
use crate::optical_flow::HsvFrame;

pub const FEATURE_DIM: usize = 8;

/// Names of the baseline features, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "total_energy",
    "mean_magnitude",
    "band_0_1",
    "band_1.5_3",
    "band_3_5",
    "nns_ratio",
    "top10_fraction",
    "temporal_std",
];

/// Band edges in Hz: low, NNS, high. Bands are closed intervals over the
/// DFT bin frequencies; the DC bin is never part of a band.
pub const BANDS_HZ: [(f64, f64); 3] = [(0.0, 1.0), (1.5, 3.0), (3.0, 5.0)];

pub const SCORE_HEADER: &str = "source,start_s,end_s,score";
pub const MODEL_VERSION: &str = "v1";
pub const META_FILE: &str = "model.meta";

/// A run of flow-encoded frames to be scored.
#[derive(Debug, Clone)]
pub struct Window {
    pub source: String,
    pub start_s: f64,
    pub end_s: f64,
    pub hsv_frames: Vec<HsvFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowScore {
    pub source: String,
    pub start_s: f64,
    pub end_s: f64,
    pub score: f64,
}

/// Sampling rate of the flow frames inside a window.
fn window_rate(w: &Window) -> f64 {
    let span = w.end_s - w.start_s;
    if span > 0.0 {
        w.hsv_frames.len() as f64 / span
    } else {
        10.0
    }
}

/// The 8 features listed in [`FEATURE_NAMES`]. A window with no frames or no
/// motion maps to the zero vector.
pub fn extract_features(w: &Window) -> [f64; FEATURE_DIM] {
    let n = w.hsv_frames.len();
    if n == 0 {
        return [0.0; FEATURE_DIM];
    }
    let mut series = Vec::with_capacity(n);
    let mut pixel_energy: Vec<f64> = vec![0.0; w.hsv_frames[0].value.data().len()];
    for f in &w.hsv_frames {
        let s = f.scale as f64;
        let mut sum = 0.0;
        for (acc, &v) in pixel_energy.iter_mut().zip(f.value.data()) {
            let m = v as f64 * s;
            sum += m;
            *acc += m * m;
        }
        series.push(sum / f.value.data().len().max(1) as f64);
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let total_energy = series.iter().map(|m| m * m).sum::<f64>() / n as f64;
    let temporal_std = (series.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let bands = band_energies(&series, window_rate(w));
    let ac_total: f64 = bands.1;
    let nns_ratio = if ac_total > 0.0 { bands.0[1] / ac_total } else { 0.0 };

    let total_px: f64 = pixel_energy.iter().sum();
    let top10 = if total_px > 0.0 {
        pixel_energy.sort_by(|a, b| b.total_cmp(a));
        let k = pixel_energy.len().div_ceil(10);
        pixel_energy[..k].iter().sum::<f64>() / total_px
    } else {
        0.0
    };
    [
        total_energy,
        mean,
        bands.0[0],
        bands.0[1],
        bands.0[2],
        nns_ratio,
        top10,
        temporal_std,
    ]
}

/// Energies of `BANDS_HZ` plus the total over all non-DC bins, from the DFT
/// of the mean-removed series. Energies are `|X_k|² / N²`.
pub fn band_energies(series: &[f64], rate_hz: f64) -> ([f64; 3], f64) {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n.max(1) as f64;
    let mut bands = [0.0; 3];
    let mut total = 0.0;
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &x) in series.iter().enumerate() {
            let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += (x - mean) * a.cos();
            im += (x - mean) * a.sin();
        }
        // one-sided: mirror bins count twice except Nyquist
        let mirror = if 2 * k == n { 1.0 } else { 2.0 };
        let e = mirror * (re * re + im * im) / (n * n) as f64;
        let freq = k as f64 * rate_hz / n as f64;
        total += e;
        for (b, &(lo, hi)) in bands.iter_mut().zip(&BANDS_HZ) {
            if freq >= lo - 1e-9 && freq <= hi + 1e-9 {
                *b += e;
                break;
            }
        }
    }
    (bands, total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 500,
            l2: 1e-3,
        }
    }
}

/// Logistic regression over raw (unstandardized) features.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl BaselineModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        let z: f64 = self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        sigmoid(z)
    }
}

/// Gradient of the mean logistic loss plus `l2/2 · |w|²` (bias unpenalized).
pub fn logistic_gradient(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[bool], l2: f64) -> (Vec<f64>, f64) {
    let n = xs.len() as f64;
    let mut gw: Vec<f64> = w.iter().map(|wi| l2 * wi).collect();
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let z = b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let r = sigmoid(z) - if y { 1.0 } else { 0.0 };
        for (g, v) in gw.iter_mut().zip(x) {
            *g += r * v / n;
        }
        gb += r / n;
    }
    (gw, gb)
}

/// Full-batch gradient descent from zero on standardized features; the
/// standardization is folded back so the returned model takes raw features.
pub fn train_baseline(examples: &[(Vec<f64>, bool)], params: &TrainParams) -> Result<BaselineModel> {
    if examples.len() < 2 {
        return Err(Error::invalid("training needs at least two examples"));
    }
    let dim = examples[0].0.len();
    if examples.iter().any(|(x, _)| x.len() != dim) {
        return Err(Error::invalid("feature vectors differ in length"));
    }
    let pos = examples.iter().filter(|(_, y)| *y).count();
    if pos == 0 || pos == examples.len() {
        return Err(Error::SingleClass);
    }
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || params.l2 < 0.0 {
        return Err(Error::invalid("learning rate must be positive and l2 non-negative"));
    }

    let n = examples.len() as f64;
    let mut mean = vec![0.0; dim];
    for (x, _) in examples {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; dim];
    for (x, _) in examples {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    let std: Vec<f64> = std.iter().map(|v| if *v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
    let xs: Vec<Vec<f64>> = examples
        .iter()
        .map(|(x, _)| x.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let ys: Vec<bool> = examples.iter().map(|(_, y)| *y).collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    for _ in 0..params.epochs {
        let (gw, gb) = logistic_gradient(&w, b, &xs, &ys, params.l2);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= params.learning_rate * g;
        }
        b -= params.learning_rate * gb;
    }
    let weights: Vec<f64> = w.iter().zip(&std).map(|(wi, s)| wi / s).collect();
    let bias = b - weights.iter().zip(&mean).map(|(wi, m)| wi * m).sum::<f64>();
    Ok(BaselineModel { weights, bias })
}

fn feature_spec_line() -> String {
    let bands: Vec<String> = BANDS_HZ.iter().map(|(lo, hi)| format!("{lo}-{hi}")).collect();
    format!("bands={} stats={}", bands.join(","), FEATURE_NAMES.join(","))
}

pub fn format_baseline(model: &BaselineModel) -> String {
    let w: Vec<String> = model.weights.iter().map(|v| format!("{v:e}")).collect();
    format!(
        "{MODEL_VERSION}\n{}\n{}\n{:e}\n",
        feature_spec_line(),
        w.join(" "),
        model.bias
    )
}

pub fn write_baseline(path: &Path, model: &BaselineModel, comment: Option<&str>) -> Result<()> {
    let mut s = String::new();
    for line in comment.into_iter().flat_map(str::lines) {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str(&format_baseline(model));
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_baseline(path: &Path) -> Result<BaselineModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(usize, &str)> = data_lines(&text).collect();
    if lines.len() != 4 {
        return Err(Error::parse(
            path,
            1,
            "expected version, feature spec, weights and bias lines",
        ));
    }
    if lines[0].1 != MODEL_VERSION {
        return Err(Error::parse(
            path,
            lines[0].0,
            format!("unsupported model version `{}`", lines[0].1),
        ));
    }
    if lines[1].1 != feature_spec_line() {
        return Err(Error::parse(path, lines[1].0, "feature spec does not match this build"));
    }
    let num = |(i, s): (usize, &str)| {
        s.parse::<f64>()
            .map_err(|_| Error::parse(path, i, format!("bad number `{s}`")))
    };
    let weights = lines[2]
        .1
        .split_whitespace()
        .map(|s| num((lines[2].0, s)))
        .collect::<Result<Vec<_>>>()?;
    if weights.len() != FEATURE_DIM {
        return Err(Error::parse(
            path,
            lines[2].0,
            format!("expected {FEATURE_DIM} weights, found {}", weights.len()),
        ));
    }
    Ok(BaselineModel {
        weights,
        bias: num(lines[3])?,
    })
}

/// Pre-computed scores keyed by `(source, start in ms)`.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: HashMap<(String, i64), f64>,
}

pub fn time_key_ms(t: f64) -> i64 {
    (t * 1000.0).round() as i64
}

impl ScoreTable {
    pub fn from_scores(scores: &[WindowScore]) -> Result<Self> {
        let mut table = ScoreTable::default();
        for s in scores {
            if !(0.0..=1.0).contains(&s.score) {
                return Err(Error::invalid(format!("score {} outside [0, 1]", s.score)));
            }
            table.scores.insert((s.source.clone(), time_key_ms(s.start_s)), s.score);
        }
        Ok(table)
    }

    pub fn get(&self, source: &str, start_s: f64) -> Option<f64> {
        self.scores.get(&(source.to_string(), time_key_ms(start_s))).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

pub fn read_scores(path: &Path) -> Result<Vec<WindowScore>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = data_lines(&text);
    match rows.next() {
        Some((_, h)) if h == SCORE_HEADER => {}
        Some((i, _)) => return Err(Error::parse(path, i, format!("expected header `{SCORE_HEADER}`"))),
        None => return Err(Error::parse(path, 1, "empty score file")),
    }
    let mut out = Vec::new();
    for (i, line) in rows {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(path, i, "expected 4 fields"));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, i, format!("bad number `{s}`")))
        };
        let score = num(f[3])?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::parse(path, i, format!("score {score} outside [0, 1]")));
        }
        out.push(WindowScore {
            source: f[0].to_string(),
            start_s: num(f[1])?,
            end_s: num(f[2])?,
            score,
        });
    }
    Ok(out)
}

pub fn format_scores(scores: &[WindowScore], comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str(SCORE_HEADER);
    s.push('\n');
    for w in scores {
        s.push_str(&format!(
            "{},{:.3},{:.3},{:.6}\n",
            w.source, w.start_s, w.end_s, w.score
        ));
    }
    s
}

pub fn write_scores(path: &Path, scores: &[WindowScore], comment: Option<&str>) -> Result<()> {
    fs::write(path, format_scores(scores, comment)).map_err(|e| Error::io(path, e))
}

/// Sidecar describing what an ONNX model expects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub input_size: usize,
    pub frames: usize,
    pub emits_logit: bool,
}

pub fn read_model_meta(path: &Path) -> Result<ModelMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut size, mut frames, mut emits) = (None, None, None);
    for (i, line) in data_lines(&text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(path, i, "expected key=value"))?;
        let int = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(path, i, format!("bad integer `{v}`")))
        };
        match k.trim() {
            "input_size" => size = Some(int(v)?),
            "frames" => frames = Some(int(v)?),
            "emits" => {
                emits = Some(match v.trim() {
                    "logit" => true,
                    "probability" => false,
                    other => {
                        return Err(Error::parse(
                            path,
                            i,
                            format!("emits must be logit or probability, got `{other}`"),
                        ))
                    }
                })
            }
            other => return Err(Error::parse(path, i, format!("unknown key `{other}`"))),
        }
    }
    match (size, frames, emits) {
        (Some(input_size), Some(frames), Some(emits_logit)) if input_size > 0 && frames > 0 => Ok(ModelMeta {
            input_size,
            frames,
            emits_logit,
        }),
        _ => Err(Error::parse(
            path,
            1,
            "model.meta needs positive input_size, frames and emits",
        )),
    }
}

#[cfg(feature = "onnx")]
mod onnx {
    use std::sync::Arc;

    use tract_onnx::prelude::*;

    use super::*;

    pub struct OnnxModel {
        pub meta: ModelMeta,
        pub path: std::path::PathBuf,
        plan: Arc<TypedSimplePlan>,
    }

    impl std::fmt::Debug for OnnxModel {
        fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.debug_struct("OnnxModel")
                .field("path", &self.path)
                .field("meta", &self.meta)
                .finish_non_exhaustive()
        }
    }

    fn tract_err(path: &Path, e: impl std::fmt::Display) -> Error {
        Error::BackendNotReady(format!("{}: {e}", path.display()))
    }

    impl OnnxModel {
        /// Loads `path`, reading `model.meta` from the same directory.
        pub fn load(path: &Path) -> Result<Self> {
            let meta_path = path.with_file_name(META_FILE);
            let meta = read_model_meta(&meta_path)?;
            let shape = [1, meta.frames, 3, meta.input_size, meta.input_size];
            let plan = tract_onnx::onnx()
                .model_for_path(path)
                .and_then(|m| m.with_input_fact(0, f32::fact(shape).into()))
                .and_then(|m| m.into_optimized())
                .and_then(|m| m.into_runnable())
                .map_err(|e| tract_err(path, e))?;
            Ok(Self {
                meta,
                path: path.to_path_buf(),
                plan,
            })
        }

        pub fn score(&self, w: &Window) -> Result<f64> {
            let (t, s) = (self.meta.frames, self.meta.input_size);
            let found_dims = w.hsv_frames.first().map(|f| f.dims()).unwrap_or((0, 0));
            if w.hsv_frames.len() != t || w.hsv_frames.iter().any(|f| f.dims() != (s, s)) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{t} frames of {s}x{s}"),
                    found: format!("{} frames of {}x{}", w.hsv_frames.len(), found_dims.0, found_dims.1),
                });
            }
            let mut data = Vec::with_capacity(t * 3 * s * s);
            for f in &w.hsv_frames {
                data.extend_from_slice(f.hue.data());
                data.extend_from_slice(f.saturation.data());
                data.extend_from_slice(f.value.data());
            }
            let input = Tensor::from_shape(&[1, t, 3, s, s], &data).map_err(|e| tract_err(&self.path, e))?;
            let out = self
                .plan
                .run(tvec!(input.into()))
                .map_err(|e| tract_err(&self.path, e))?;
            let view = out[0]
                .to_plain_array_view::<f32>()
                .map_err(|e| tract_err(&self.path, e))?;
            if view.len() != 1 {
                return Err(Error::ShapeMismatch {
                    expected: "a single output value".into(),
                    found: format!("{} values", view.len()),
                });
            }
            let v = *view.iter().next().expect("one value") as f64;
            let p = if self.meta.emits_logit { sigmoid(v) } else { v };
            if !p.is_finite() {
                return Err(Error::invalid("model produced a non-finite score"));
            }
            Ok(p.clamp(0.0, 1.0))
        }
    }
}

#[cfg(feature = "onnx")]
pub use onnx::OnnxModel;

#[derive(Debug)]
pub enum Backend {
    ScoreFile(ScoreTable),
    #[cfg(feature = "onnx")]
    Onnx(OnnxModel),
    Baseline(BaselineModel),
}

impl Backend {
    /// Parses `scorefile:<csv>`, `onnx:<model.onnx>` or `baseline:<model.txt>`.
    pub fn load(spec: &str) -> Result<Self> {
        let (kind, path) = spec
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("backend `{spec}` must look like kind:path")))?;
        let path = Path::new(path);
        match kind {
            "scorefile" => Ok(Backend::ScoreFile(ScoreTable::from_scores(&read_scores(path)?)?)),
            "baseline" => Ok(Backend::Baseline(read_baseline(path)?)),
            #[cfg(feature = "onnx")]
            "onnx" => Ok(Backend::Onnx(OnnxModel::load(path)?)),
            #[cfg(not(feature = "onnx"))]
            "onnx" => Err(Error::BackendNotReady("built without ONNX support".into())),
            other => Err(Error::invalid(format!("unknown backend `{other}`"))),
        }
    }

    /// Whether scoring needs the window's frames.
    pub fn needs_frames(&self) -> bool {
        !matches!(self, Backend::ScoreFile(_))
    }
}

pub fn classify_window(backend: &Backend, w: &Window) -> Result<WindowScore> {
    let score = match backend {
        Backend::ScoreFile(table) => table.get(&w.source, w.start_s).ok_or_else(|| Error::ScoreMiss {
            source_id: w.source.clone(),
            start_s: w.start_s,
        })?,
        #[cfg(feature = "onnx")]
        Backend::Onnx(model) => model.score(w)?,
        Backend::Baseline(model) => {
            if model.weights.len() != FEATURE_DIM {
                return Err(Error::ShapeMismatch {
                    expected: format!("{FEATURE_DIM} weights"),
                    found: format!("{} weights", model.weights.len()),
                });
            }
            if let Some(f) = w.hsv_frames.first() {
                if w.hsv_frames.iter().any(|g| g.dims() != f.dims()) {
                    return Err(Error::invalid("window frames differ in size"));
                }
            }
            model.score(&extract_features(w))
        }
    };
    Ok(WindowScore {
        source: w.source.clone(),
        start_s: w.start_s,
        end_s: w.end_s,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::Plane;

    fn window_from_series(series: &[f32]) -> Window {
        let frames = series
            .iter()
            .map(|&m| HsvFrame {
                hue: Plane::zeros(8, 8),
                saturation: Plane::filled(8, 8, 1.0),
                value: Plane::filled(8, 8, if m > 0.0 { 1.0 } else { 0.0 }),
                scale: m,
            })
            .collect();
        Window {
            source: "s".into(),
            start_s: 0.0,
            end_s: 2.5,
            hsv_frames: frames,
        }
    }

    fn tone(hz: f64) -> Vec<f32> {
        (0..25)
            .map(|k| (1.0 + 0.8 * (2.0 * std::f64::consts::PI * hz * k as f64 / 10.0).sin()) as f32)
            .collect()
    }

    #[test]
    fn black_window_is_zero_vector() {
        assert_eq!(extract_features(&window_from_series(&[0.0; 25])), [0.0; FEATURE_DIM]);
    }

    #[test]
    fn two_hz_tone_lands_in_nns_band() {
        let f = extract_features(&window_from_series(&tone(2.0)));
        assert!(f[5] > 0.8, "ratio {}", f[5]);
    }

    #[test]
    fn slow_drift_stays_out_of_nns_band() {
        let f = extract_features(&window_from_series(&tone(0.3)));
        assert!(f[5] < 0.2, "ratio {}", f[5]);
    }

    #[test]
    fn bias_gradient_vanishes_on_balanced_data() {
        let xs = vec![vec![1.0, 2.0], vec![-1.0, -2.0]];
        let (_, gb) = logistic_gradient(&[0.0, 0.0], 0.0, &xs, &[true, false], 0.0);
        assert_eq!(gb, 0.0);
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let mut ex = Vec::new();
        for i in 0..50 {
            let t = i as f64 / 10.0;
            ex.push((vec![1.0 + t.sin().abs(), 0.5 * t.cos()], true));
            ex.push((vec![-1.0 - t.cos().abs(), 0.5 * t.sin()], false));
        }
        let m = train_baseline(&ex, &TrainParams::default()).unwrap();
        let correct = ex.iter().filter(|(x, y)| (m.score(x) >= 0.5) == *y).count();
        assert!(correct as f64 / ex.len() as f64 >= 0.99);
    }

    #[test]
    fn single_class_is_rejected() {
        let ex = vec![(vec![1.0], true), (vec![2.0], true)];
        assert!(matches!(
            train_baseline(&ex, &TrainParams::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn baseline_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = BaselineModel {
            weights: (0..8).map(|i| i as f64 * 0.125 - 0.3).collect(),
            bias: -1.25e-3,
        };
        write_baseline(&path, &m, Some("a=1\nb=2")).unwrap();
        assert_eq!(read_baseline(&path).unwrap(), m);
        fs::write(&path, "v2\n").unwrap();
        assert!(read_baseline(&path).is_err());
    }

    #[test]
    fn score_file_replay_requires_exact_start() {
        let table = ScoreTable::from_scores(&[WindowScore {
            source: "clipA".into(),
            start_s: 0.0,
            end_s: 2.5,
            score: 0.72,
        }])
        .unwrap();
        let backend = Backend::ScoreFile(table);
        let mut w = window_from_series(&[]);
        w.source = "clipA".into();
        assert_eq!(classify_window(&backend, &w).unwrap().score, 0.72);
        w.start_s = 0.5;
        assert!(matches!(classify_window(&backend, &w), Err(Error::ScoreMiss { .. })));
    }

    #[test]
    fn model_meta_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(META_FILE);
        fs::write(&path, "input_size=32\nframes=25\nemits=logit\n").unwrap();
        assert_eq!(
            read_model_meta(&path).unwrap(),
            ModelMeta {
                input_size: 32,
                frames: 25,
                emits_logit: true
            }
        );
        fs::write(&path, "input_size=32\nframes=25\nemits=maybe\n").unwrap();
        assert!(read_model_meta(&path).is_err());
    }
}
