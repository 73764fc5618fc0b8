//! Interval IoU, highest-IoU matching, AP/AR with equal subject weight,
//! window accuracy and Cohen's kappa on incidence bins.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::classifier::WindowScore;
use crate::error::{Error, Result};
use crate::events::Event;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.1, 0.3, 0.5];
pub const REPORT_HEADER: &str = "subject,t,precision,recall,tp,fp,fn";

pub fn interval_iou(a: &Event, b: &Event) -> f64 {
    let inter = (a.end_s.min(b.end_s) - a.start_s.max(b.start_s)).max(0.0);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.duration() + b.duration() - inter;
    inter / union
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

/// Greedy one-to-one matching by descending IoU among pairs with IoU ≥ `t`.
/// Ties go to the earlier prediction start, then the earlier GT start.
pub fn match_events(pred: &[Event], gt: &[Event], t: f64) -> Vec<Match> {
    let mut pairs: Vec<Match> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let iou = interval_iou(p, g);
            if iou > 0.0 && iou >= t {
                pairs.push(Match { pred: i, gt: j, iou });
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(pred[a.pred].start_s.total_cmp(&pred[b.pred].start_s))
            .then(gt[a.gt].start_s.total_cmp(&gt[b.gt].start_s))
            .then(a.pred.cmp(&b.pred))
            .then(a.gt.cmp(&b.gt))
    });
    let mut used_p = vec![false; pred.len()];
    let mut used_g = vec![false; gt.len()];
    let mut out = Vec::new();
    for m in pairs {
        if !used_p[m.pred] && !used_g[m.gt] {
            used_p[m.pred] = true;
            used_g[m.gt] = true;
            out.push(m);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn of(pred: &[Event], gt: &[Event], t: f64) -> Self {
        let tp = match_events(pred, gt, t).len();
        Counts {
            tp,
            fp: pred.len() - tp,
            fn_: gt.len() - tp,
        }
    }

    /// No predictions counts as precision 1.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// No ground truth counts as recall 1.
    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    fn add(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

pub fn precision_recall(pred: &[Event], gt: &[Event], t: f64) -> (f64, f64) {
    let c = Counts::of(pred, gt, t);
    (c.precision(), c.recall())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow {
    pub subject: String,
    pub t: f64,
    pub counts: Counts,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub rows: Vec<SubjectRow>,
    /// `(t, AP_t, AR_t)`.
    pub summary: Vec<(f64, f64, f64)>,
}

impl EvalReport {
    pub fn ap(&self, t: f64) -> Option<f64> {
        self.summary.iter().find(|s| (s.0 - t).abs() < 1e-12).map(|s| s.1)
    }

    pub fn ar(&self, t: f64) -> Option<f64> {
        self.summary.iter().find(|s| (s.0 - t).abs() < 1e-12).map(|s| s.2)
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            for line in c.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        let _ = writeln!(s, "{REPORT_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{},{},{}",
                r.subject, r.t, r.precision, r.recall, r.counts.tp, r.counts.fp, r.counts.fn_
            );
        }
        for (t, ap, ar) in &self.summary {
            let _ = writeln!(s, "ALL,{t},{ap:.6},{ar:.6},,,");
        }
        s
    }

    pub fn write_csv(&self, path: &Path, comment: Option<&str>) -> Result<()> {
        fs::write(path, self.to_csv(comment)).map_err(|e| Error::io(path, e))
    }
}

/// Clips of one subject: `(predictions, ground truth)` pairs.
pub type SubjectClips = Vec<(Vec<Event>, Vec<Event>)>;

/// Counts are pooled over a subject's clips before taking ratios; subjects
/// are then averaged with equal weight.
pub fn ap_ar_report(per_subject: &BTreeMap<String, SubjectClips>, thresholds: &[f64]) -> Result<EvalReport> {
    if per_subject.is_empty() {
        return Err(Error::invalid("evaluation needs at least one subject"));
    }
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &t in thresholds {
        let (mut sp, mut sr) = (0.0, 0.0);
        for (subject, clips) in per_subject {
            let mut c = Counts::default();
            for (p, g) in clips {
                c.add(Counts::of(p, g, t));
            }
            sp += c.precision();
            sr += c.recall();
            rows.push(SubjectRow {
                subject: subject.clone(),
                t,
                counts: c,
                precision: c.precision(),
                recall: c.recall(),
            });
        }
        let n = per_subject.len() as f64;
        summary.push((t, sp / n, sr / n));
    }
    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        rows,
        summary,
    })
}

pub fn binary_accuracy(scores: &[WindowScore], labels: &[bool], threshold: f64) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("accuracy of an empty set is undefined"));
    }
    let hits = scores
        .iter()
        .zip(labels)
        .filter(|(s, &l)| (s.score >= threshold) == l)
        .count();
    Ok(hits as f64 / scores.len() as f64)
}

/// Positive bins: `[k·w, min((k+1)·w, duration))` intersecting any event.
pub fn incidence_bins(events: &[Event], duration_s: f64, window_s: f64) -> Vec<bool> {
    let n = (duration_s / window_s - 1e-9).ceil().max(0.0) as usize;
    (0..n)
        .map(|k| {
            let lo = k as f64 * window_s;
            let hi = ((k + 1) as f64 * window_s).min(duration_s);
            events.iter().any(|e| e.overlap(lo, hi) > 0.0)
        })
        .collect()
}

/// Cohen's kappa from two binary label sequences.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 1.0;
    }
    let (mut both, mut only_a, mut only_b, mut neither) = (0usize, 0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (true, true) => both += 1,
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            (false, false) => neither += 1,
        }
    }
    let n = n as f64;
    let po = (both + neither) as f64 / n;
    let pa = (both + only_a) as f64 / n;
    let pb = (both + only_b) as f64 / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - pe).abs() < 1e-12 {
        return if (po - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

pub fn cohen_kappa_incidence(a: &[Event], b: &[Event], duration_s: f64, window_s: f64) -> Result<f64> {
    if !(duration_s > 0.0 && window_s > 0.0) {
        return Err(Error::invalid("duration and window must be positive"));
    }
    Ok(cohen_kappa(
        &incidence_bins(a, duration_s, window_s),
        &incidence_bins(b, duration_s, window_s),
    ))
}
