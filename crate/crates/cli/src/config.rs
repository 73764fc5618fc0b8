//! Flat `key=value` pipeline configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, command
//! line flags. Every key is also a global flag (`window_s` is
//! `--window-s`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nns_core::classifier::TrainParams;
use nns_core::optical_flow::{FlowParams, HsvNorm};
use nns_core::pipeline::PreprocessParams;
use nns_core::segmenter::{AggregationMode, SegmentParams};
use nns_core::stabilizer::AugmentParams;

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const SCHEMA: &[Key] = &[
    key("seed", "0", "Seed for every random draw"),
    key("fps", "10", "Frame rate of directories without meta.txt"),
    key("mosse_learning_rate", "0.125", "MOSSE running-average rate"),
    key("mosse_regularizer", "1e-5", "MOSSE filter regularizer"),
    key(
        "mosse_psr_threshold",
        "8",
        "Peak-to-sidelobe ratio below which the box is held",
    ),
    key(
        "mosse_perturbations",
        "8",
        "Warped copies of the first patch at initialization",
    ),
    key("corners_max", "200", "Maximum Shi-Tomasi corners per frame"),
    key(
        "corners_quality",
        "0.01",
        "Minimum corner response relative to the best",
    ),
    key("corners_min_distance", "8", "Minimum spacing between corners, pixels"),
    key("lk_levels", "3", "Lucas-Kanade pyramid levels"),
    key("lk_window", "15", "Lucas-Kanade window side, pixels"),
    key("lk_iterations", "10", "Lucas-Kanade iterations per level"),
    key("smooth_window_s", "1.5", "Trajectory moving-average window, seconds"),
    key("crop_size", "112", "Side of the stabilized face crop, pixels"),
    key(
        "crop_margin",
        "0.1",
        "Fraction of the box added on each side of the crop",
    ),
    key("augment", "false", "Apply one seeded rotation/scale/flip to the crops"),
    key("augment_rotation_deg", "15", "Maximum augmentation rotation, degrees"),
    key("augment_scale_range", "0.1", "Augmentation scale drawn from 1 +/- this"),
    key("augment_flip_prob", "0.5", "Probability of a horizontal flip"),
    key("flow_levels", "3", "Dense flow pyramid levels"),
    key("flow_pyr_scale", "0.5", "Dense flow pyramid scale step"),
    key("flow_window", "15", "Dense flow averaging window, pixels"),
    key("flow_iterations", "3", "Dense flow iterations per level"),
    key("flow_poly_n", "5", "Polynomial expansion neighbourhood, pixels"),
    key("flow_poly_sigma", "1.1", "Polynomial expansion Gaussian sigma"),
    key(
        "hsv_norm",
        "per-frame",
        "HSV value normalization: per-frame or fixed:<max px>",
    ),
    key(
        "backend",
        "",
        "Window scorer: baseline:<file>, onnx:<file> or scorefile:<file>",
    ),
    key("mode", "smoothed", "Aggregation: tiled, sliding or smoothed"),
    key("window_s", "2.5", "Classifier window length, seconds"),
    key("stride_s", "0.5", "Sliding window stride, seconds"),
    key("resolution_s", "0.5", "Segment length of the output track, seconds"),
    key("threshold", "0.5", "Score at or above which a segment is NNS"),
    key("smoothing_s", "2.5", "Moving-average span in smoothed mode, seconds"),
    key("min_dur_s", "0.5", "Shortest event kept, seconds"),
    key("merge_gap_s", "0", "Events closer than this are merged, seconds"),
    key(
        "eval_thresholds",
        "0.1,0.3,0.5",
        "IoU thresholds of the evaluation report",
    ),
    key("train_learning_rate", "0.5", "Baseline gradient-descent step"),
    key("train_epochs", "500", "Baseline gradient-descent epochs"),
    key("train_l2", "0.001", "Baseline L2 penalty"),
    key(
        "clip_policy",
        "classification",
        "Clip sampling: classification or segmentation",
    ),
    key("clip_s", "auto", "Clip length, seconds (auto: 2.5 or 60 by policy)"),
    key("n_pos", "80", "NNS clips per annotation file"),
    key("n_neg", "80", "Non-NNS clips per annotation file"),
    key("n_mixed", "5", "Transition clips per annotation file"),
    key("kappa_window_s", "10", "Incidence bin length for agreement, seconds"),
];

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn schema_key(name: &str) -> Option<&'static Key> {
    SCHEMA.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
    explicit: BTreeSet<&'static str>,
}

impl Config {
    /// Defaults, then `file`, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(&'static str, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<&'static str, String> =
            SCHEMA.iter().map(|k| (k.name, k.default.to_string())).collect();
        let mut explicit = BTreeSet::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let mut seen = BTreeSet::new();
            for (i, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let at = |m: String| CliError::Invalid(format!("{}:{}: {m}", path.display(), i + 1));
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| at(format!("expected key=value, found `{line}`")))?;
                let k = k.trim();
                let key = schema_key(k).ok_or_else(|| at(format!("unknown key `{k}`")))?;
                if !seen.insert(key.name) {
                    return Err(at(format!("key `{k}` given twice")));
                }
                values.insert(key.name, v.trim().to_string());
                explicit.insert(key.name);
            }
        }
        for (k, v) in overrides {
            values.insert(k, v.clone());
            explicit.insert(k);
        }
        let cfg = Self { values, explicit };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a schema key"))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T, CliError> {
        let v = self.get(key);
        v.parse()
            .map_err(|_| CliError::Invalid(format!("{key}: expected {what}, found `{v}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v: f64 = self.parsed(key, "a number")?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CliError::Invalid(format!("{key}: must be finite")))
        }
    }

    pub fn f32(&self, key: &str) -> Result<f32, CliError> {
        Ok(self.f64(key)? as f32)
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        self.parsed(key, "true or false")
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.get(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Invalid(format!("{key}: bad number `{s}`")))
            })
            .collect()
    }

    /// Type-checks every key so bad values fail before any work starts.
    fn validate(&self) -> Result<(), CliError> {
        self.u64("seed")?;
        for k in [
            "mosse_perturbations",
            "corners_max",
            "lk_levels",
            "lk_window",
            "lk_iterations",
            "crop_size",
            "flow_levels",
            "flow_window",
            "flow_iterations",
            "flow_poly_n",
            "train_epochs",
            "n_pos",
            "n_neg",
            "n_mixed",
        ] {
            self.usize(k)?;
        }
        for k in [
            "fps",
            "mosse_learning_rate",
            "mosse_regularizer",
            "mosse_psr_threshold",
            "corners_quality",
            "corners_min_distance",
            "smooth_window_s",
            "crop_margin",
            "augment_rotation_deg",
            "augment_scale_range",
            "augment_flip_prob",
            "flow_pyr_scale",
            "flow_poly_sigma",
            "window_s",
            "stride_s",
            "resolution_s",
            "threshold",
            "smoothing_s",
            "min_dur_s",
            "merge_gap_s",
            "train_learning_rate",
            "train_l2",
            "kappa_window_s",
        ] {
            self.f64(k)?;
        }
        if self.f64("fps")? <= 0.0 {
            return Err(CliError::Invalid("fps: must be positive".into()));
        }
        self.bool("augment")?;
        self.hsv_norm()?;
        self.mode()?;
        self.clip_length()?;
        self.f64_list("eval_thresholds")?;
        if !matches!(self.get("clip_policy"), "classification" | "segmentation") {
            return Err(CliError::Invalid(format!(
                "clip_policy: expected classification or segmentation, found `{}`",
                self.get("clip_policy")
            )));
        }
        Ok(())
    }

    pub fn hsv_norm(&self) -> Result<HsvNorm, CliError> {
        match self.get("hsv_norm") {
            "per-frame" => Ok(HsvNorm::PerFrame),
            v => {
                let max = v
                    .strip_prefix("fixed:")
                    .and_then(|m| m.parse::<f32>().ok())
                    .filter(|m| *m > 0.0 && m.is_finite())
                    .ok_or_else(|| {
                        CliError::Invalid(format!("hsv_norm: expected per-frame or fixed:<max>, found `{v}`"))
                    })?;
                Ok(HsvNorm::Fixed(max))
            }
        }
    }

    pub fn mode(&self) -> Result<AggregationMode, CliError> {
        self.get("mode").parse().map_err(CliError::from)
    }

    pub fn clip_length(&self) -> Result<Option<f64>, CliError> {
        match self.get("clip_s") {
            "auto" => Ok(None),
            _ => {
                let v = self.f64("clip_s")?;
                if v > 0.0 {
                    Ok(Some(v))
                } else {
                    Err(CliError::Invalid("clip_s: must be positive".into()))
                }
            }
        }
    }

    pub fn preprocess(&self) -> Result<PreprocessParams, CliError> {
        let mut p = PreprocessParams::default();
        p.mosse.learning_rate = self.f32("mosse_learning_rate")?;
        p.mosse.regularizer = self.f32("mosse_regularizer")?;
        p.mosse.psr_threshold = self.f32("mosse_psr_threshold")?;
        p.mosse.perturbations = self.usize("mosse_perturbations")?;
        p.mosse.seed = self.u64("seed")?;
        p.trajectory.corners.max_corners = self.usize("corners_max")?;
        p.trajectory.corners.quality = self.f32("corners_quality")?;
        p.trajectory.corners.min_distance = self.f32("corners_min_distance")?;
        p.trajectory.lk.levels = self.usize("lk_levels")?;
        p.trajectory.lk.window = self.usize("lk_window")?;
        p.trajectory.lk.iterations = self.usize("lk_iterations")?;
        p.smooth_window_s = self.f64("smooth_window_s")?;
        p.crop.out_size = self.usize("crop_size")?;
        p.crop.margin = self.f32("crop_margin")?;
        p.flow = self.flow()?;
        p.norm = self.hsv_norm()?;
        Ok(p)
    }

    pub fn flow(&self) -> Result<FlowParams, CliError> {
        Ok(FlowParams {
            levels: self.usize("flow_levels")?,
            pyr_scale: self.f32("flow_pyr_scale")?,
            window: self.usize("flow_window")?,
            iterations: self.usize("flow_iterations")?,
            poly_n: self.usize("flow_poly_n")?,
            poly_sigma: self.f32("flow_poly_sigma")?,
        })
    }

    pub fn augment(&self) -> Result<Option<AugmentParams>, CliError> {
        if !self.bool("augment")? {
            return Ok(None);
        }
        Ok(Some(AugmentParams {
            rotation_deg: self.f32("augment_rotation_deg")?,
            scale_range: self.f32("augment_scale_range")?,
            flip_prob: self.f32("augment_flip_prob")?,
            seed: self.u64("seed")?,
        }))
    }

    pub fn segment(&self) -> Result<SegmentParams, CliError> {
        let p = SegmentParams {
            mode: self.mode()?,
            window_s: self.f64("window_s")?,
            stride_s: self.f64("stride_s")?,
            resolution_s: self.f64("resolution_s")?,
            threshold: self.f64("threshold")?,
            smoothing_s: self.f64("smoothing_s")?,
            min_dur_s: self.f64("min_dur_s")?,
            merge_gap_s: self.f64("merge_gap_s")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn train(&self) -> Result<TrainParams, CliError> {
        Ok(TrainParams {
            learning_rate: self.f64("train_learning_rate")?,
            epochs: self.usize("train_epochs")?,
            l2: self.f64("train_l2")?,
        })
    }

    /// The resolved configuration as `key=value` lines, for artifact headers.
    pub fn header(&self, command: &str) -> String {
        let mut s = format!("nns {command}");
        for (k, v) in &self.values {
            s.push('\n');
            s.push_str(k);
            s.push('=');
            s.push_str(v);
        }
        s
    }
}
