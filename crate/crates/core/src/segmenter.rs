//! Window cover, score aggregation and event extraction.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::classifier::{classify_window, Backend, Window, WindowScore};
use crate::error::{Error, Result};
use crate::events::{Event, EventList, Label};
use crate::optical_flow::HsvFrame;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    Tiled,
    Sliding,
    Smoothed,
}

impl AggregationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::Tiled => "tiled",
            AggregationMode::Sliding => "sliding",
            AggregationMode::Smoothed => "smoothed",
        }
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiled" => Ok(AggregationMode::Tiled),
            "sliding" => Ok(AggregationMode::Sliding),
            "smoothed" => Ok(AggregationMode::Smoothed),
            other => Err(Error::invalid(format!("unknown aggregation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    pub mode: AggregationMode,
    pub window_s: f64,
    pub stride_s: f64,
    /// Segment length; also the sliding stride's assignment unit.
    pub resolution_s: f64,
    pub threshold: f64,
    /// Moving-average length for smoothed mode, seconds.
    pub smoothing_s: f64,
    pub min_dur_s: f64,
    pub merge_gap_s: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            mode: AggregationMode::Smoothed,
            window_s: 2.5,
            stride_s: 0.5,
            resolution_s: 0.5,
            threshold: 0.5,
            smoothing_s: 2.5,
            min_dur_s: 0.5,
            merge_gap_s: 0.0,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0 && self.stride_s > 0.0 && self.resolution_s > 0.0) {
            return Err(Error::invalid("window, stride and resolution must be positive"));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        if self.min_dur_s < 0.0 || self.merge_gap_s < 0.0 || self.smoothing_s < 0.0 {
            return Err(Error::invalid("durations must be non-negative"));
        }
        Ok(())
    }

    fn smoothing_segments(&self) -> usize {
        let n = (self.smoothing_s / self.resolution_s).round().max(1.0) as usize;
        n | 1
    }
}

/// A window and the stretch of time its outcome is written to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub start_s: f64,
    pub end_s: f64,
    pub assign_start_s: f64,
    pub assign_end_s: f64,
}

/// Tiled windows abut and keep their whole extent; sliding (and smoothed)
/// windows step by `stride_s` and own their middle fifth.
pub fn cover_windows(duration_s: f64, mode: AggregationMode, window_s: f64, stride_s: f64) -> Result<Vec<WindowSpec>> {
    if !(window_s > 0.0 && stride_s > 0.0) {
        return Err(Error::invalid("window and stride must be positive"));
    }
    if duration_s + EPS < window_s {
        return Err(Error::invalid(format!(
            "video of {duration_s} s is shorter than one {window_s} s window"
        )));
    }
    let step = match mode {
        AggregationMode::Tiled => window_s,
        AggregationMode::Sliding | AggregationMode::Smoothed => stride_s,
    };
    let count = ((duration_s - window_s) / step + EPS).floor() as usize + 1;
    Ok((0..count)
        .map(|k| {
            let start_s = k as f64 * step;
            let end_s = start_s + window_s;
            match mode {
                AggregationMode::Tiled => WindowSpec {
                    start_s,
                    end_s,
                    assign_start_s: start_s,
                    assign_end_s: end_s,
                },
                _ => WindowSpec {
                    start_s,
                    end_s,
                    assign_start_s: start_s + 0.4 * window_s,
                    assign_end_s: start_s + 0.6 * window_s,
                },
            }
        })
        .collect())
}

/// Per-segment scores and thresholded labels for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentTrack {
    pub source: String,
    pub resolution_s: f64,
    pub duration_s: f64,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

pub fn segment_count(duration_s: f64, resolution_s: f64) -> usize {
    (duration_s / resolution_s - EPS).ceil().max(0.0) as usize
}

/// Centered moving average of odd length `len`, truncated at the edges.
pub fn moving_average(values: &[f64], len: usize) -> Vec<f64> {
    let r = len / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(values.len() - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Fills `None` entries with the nearest covered value (the earlier one on
/// a tie). Returns `None` if nothing is covered.
fn inherit_nearest(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let covered: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if covered.is_empty() {
        return None;
    }
    Some(
        (0..values.len())
            .map(|i| match values[i] {
                Some(v) => v,
                None => {
                    let j = covered.partition_point(|&c| c < i);
                    let best = match (j.checked_sub(1).map(|p| covered[p]), covered.get(j)) {
                        (Some(a), Some(&b)) => {
                            if i - a <= b - i {
                                a
                            } else {
                                b
                            }
                        }
                        (Some(a), None) => a,
                        (None, Some(&b)) => b,
                        (None, None) => unreachable!(),
                    };
                    values[best].expect("covered")
                }
            })
            .collect(),
    )
}

/// Turns window scores into a labeled segment track. `scores` must match
/// [`cover_windows`] for the mode, in order.
pub fn aggregate(scores: &[WindowScore], params: &SegmentParams, duration_s: f64) -> Result<SegmentTrack> {
    params.validate()?;
    let cover = cover_windows(duration_s, params.mode, params.window_s, params.stride_s)?;
    if scores.len() != cover.len() {
        return Err(Error::invalid(format!(
            "{} scores for a cover of {} windows",
            scores.len(),
            cover.len()
        )));
    }
    let source = scores.first().map(|s| s.source.clone()).unwrap_or_default();
    for (s, w) in scores.iter().zip(&cover) {
        if (s.start_s - w.start_s).abs() > 1e-3 || s.source != source {
            return Err(Error::invalid(format!(
                "score for ({}, {:.3} s) does not match window at {:.3} s",
                s.source, s.start_s, w.start_s
            )));
        }
        if !(0.0..=1.0).contains(&s.score) {
            return Err(Error::invalid(format!("score {} outside [0, 1]", s.score)));
        }
    }

    let res = params.resolution_s;
    let n = segment_count(duration_s, res);
    let mut raw: Vec<Option<f64>> = vec![None; n];
    for (s, w) in scores.iter().zip(&cover) {
        let a = (w.assign_start_s / res + EPS).floor() as usize;
        let b = ((w.assign_end_s / res - EPS).ceil() as usize).min(n);
        for slot in &mut raw[a.min(n)..b] {
            *slot = Some(s.score);
        }
    }
    let filled = inherit_nearest(&raw).ok_or_else(|| Error::invalid("no segment is covered by a window"))?;
    let scores_out = match params.mode {
        AggregationMode::Smoothed => moving_average(&filled, params.smoothing_segments()),
        _ => filled,
    };
    let labels = scores_out.iter().map(|&v| v >= params.threshold).collect();
    Ok(SegmentTrack {
        source,
        resolution_s: res,
        duration_s,
        scores: scores_out,
        labels,
    })
}

/// Maximal positive runs, merged across gaps shorter than `merge_gap_s`,
/// then filtered to at least `min_dur_s`.
pub fn extract_events(track: &SegmentTrack, min_dur_s: f64, merge_gap_s: f64) -> EventList {
    let res = track.resolution_s;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < track.labels.len() {
        if track.labels[i] {
            let start = i;
            while i < track.labels.len() && track.labels[i] {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(last) if ((r.0 - last.1) as f64 * res) < merge_gap_s - EPS => last.1 = r.1,
            _ => merged.push(r),
        }
    }
    merged
        .into_iter()
        .filter_map(|(a, b)| {
            let start = a as f64 * res;
            let end = (b as f64 * res).min(track.duration_s);
            if end - start + EPS < min_dur_s || end <= start {
                return None;
            }
            let conf = track.scores[a..b].iter().sum::<f64>() / (b - a) as f64;
            Event::new(start, end, Label::Nns, conf.clamp(0.0, 1.0)).ok()
        })
        .collect()
}

/// What a video provides to the segmenter.
pub enum VideoInput<'a> {
    /// HSV flow frames (one per adjacent frame pair) at `fps`.
    Flow { hsv: &'a [HsvFrame], fps: f64 },
    /// Only a duration; enough for score-file replay.
    Duration(f64),
}

impl VideoInput<'_> {
    pub fn duration_s(&self) -> f64 {
        match self {
            // n flow fields come from n + 1 frames
            VideoInput::Flow { hsv, fps } => (hsv.len() + 1) as f64 / fps,
            VideoInput::Duration(d) => *d,
        }
    }
}

/// Flow frames for a window: `round(window_s * fps)` fields starting at the
/// window's first frame. Fields past the end of the video repeat the last one.
pub fn window_frames(hsv: &[HsvFrame], fps: f64, spec: &WindowSpec) -> Vec<HsvFrame> {
    let first = (spec.start_s * fps).round() as usize;
    let count = ((spec.end_s - spec.start_s) * fps).round() as usize;
    (first..first + count)
        .map(|i| hsv[i.min(hsv.len() - 1)].clone())
        .collect()
}

/// Scores every window of the cover, in cover order.
pub fn score_windows(
    input: &VideoInput<'_>,
    source: &str,
    backend: &Backend,
    params: &SegmentParams,
) -> Result<Vec<WindowScore>> {
    params.validate()?;
    let duration = input.duration_s();
    let cover = cover_windows(duration, params.mode, params.window_s, params.stride_s)?;
    cover
        .par_iter()
        .map(|spec| {
            let hsv_frames = match input {
                VideoInput::Flow { hsv, fps } if !hsv.is_empty() => window_frames(hsv, *fps, spec),
                _ if backend.needs_frames() => {
                    return Err(Error::BackendNotReady(
                        "this backend needs flow frames, not just a duration".into(),
                    ))
                }
                _ => Vec::new(),
            };
            let w = Window {
                source: source.to_string(),
                start_s: spec.start_s,
                end_s: spec.end_s,
                hsv_frames,
            };
            classify_window(backend, &w)
        })
        .collect()
}

/// Cover, classify, aggregate and extract events for one video.
pub fn segment_video(
    input: &VideoInput<'_>,
    source: &str,
    backend: &Backend,
    params: &SegmentParams,
) -> Result<(SegmentTrack, EventList)> {
    let scores = score_windows(input, source, backend, params)?;
    let mut track = aggregate(&scores, params, input.duration_s())?;
    track.source = source.to_string();
    let events = extract_events(&track, params.min_dur_s, params.merge_gap_s);
    Ok((track, events))
}

/// One lane of the SVG timeline.
pub struct TimelineLane<'a> {
    pub source: &'a str,
    pub duration_s: f64,
    pub truth: Option<&'a [Event]>,
    pub predicted: &'a [Event],
}

const PX_PER_S: f64 = 10.0;

/// Lanes stacked vertically; ground truth above predictions; 1 px = 0.1 s.
pub fn timeline_svg(lanes: &[TimelineLane<'_>]) -> String {
    let label_w = 160.0;
    let bar_h = 14.0;
    let lane_h = 2.0 * bar_h + 16.0;
    let max_d = lanes.iter().map(|l| l.duration_s).fold(0.0, f64::max);
    let width = label_w + max_d * PX_PER_S + 10.0;
    let height = lanes.len() as f64 * lane_h + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="monospace" font-size="11">"#
    );
    for (i, lane) in lanes.iter().enumerate() {
        let y0 = 5.0 + i as f64 * lane_h;
        let _ = writeln!(
            s,
            r#"<text x="4" y="{:.1}">{}</text>"#,
            y0 + bar_h,
            xml_escape(lane.source)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{label_w}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="#f2f2f2"/>"##,
            lane.duration_s * PX_PER_S,
            2.0 * bar_h
        );
        if let Some(truth) = lane.truth {
            for e in truth {
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.1}" y="{y0:.1}" width="{:.1}" height="{bar_h}" fill="#2b7bb9"><title>truth {:.3}-{:.3}</title></rect>"##,
                    label_w + e.start_s * PX_PER_S,
                    e.duration() * PX_PER_S,
                    e.start_s,
                    e.end_s
                );
            }
        }
        for e in lane.predicted {
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{bar_h}" fill="#d9622b" fill-opacity="{:.3}"><title>pred {:.3}-{:.3} conf {:.3}</title></rect>"##,
                label_w + e.start_s * PX_PER_S,
                y0 + bar_h,
                e.duration() * PX_PER_S,
                0.4 + 0.6 * e.confidence,
                e.start_s,
                e.end_s,
                e.confidence
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_scores(duration: f64, mode: AggregationMode, v: f64) -> Vec<WindowScore> {
        cover_windows(duration, mode, 2.5, 0.5)
            .unwrap()
            .iter()
            .map(|w| WindowScore {
                source: "a".into(),
                start_s: w.start_s,
                end_s: w.end_s,
                score: v,
            })
            .collect()
    }

    fn track_from_labels(labels: &[bool]) -> SegmentTrack {
        SegmentTrack {
            source: "a".into(),
            resolution_s: 0.5,
            duration_s: labels.len() as f64 * 0.5,
            scores: labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect(),
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn tiled_cover_of_a_minute() {
        let c = cover_windows(60.0, AggregationMode::Tiled, 2.5, 0.5).unwrap();
        assert_eq!(c.len(), 24);
        assert_eq!(c[0].assign_start_s, 0.0);
        assert_eq!(c[23].assign_end_s, 60.0);
        for w in c.windows(2) {
            assert_eq!(w[0].assign_end_s, w[1].assign_start_s);
        }
    }

    #[test]
    fn sliding_cover_of_a_minute() {
        let c = cover_windows(60.0, AggregationMode::Sliding, 2.5, 0.5).unwrap();
        assert_eq!(c.len(), 116);
        assert!((c[0].assign_start_s - 1.0).abs() < 1e-9);
        assert!((c[115].assign_end_s - 59.0).abs() < 1e-9);
        let one = cover_windows(2.5, AggregationMode::Sliding, 2.5, 0.5).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].assign_start_s - 1.0).abs() < 1e-9 && (one[0].assign_end_s - 1.5).abs() < 1e-9);
        assert!(cover_windows(2.0, AggregationMode::Sliding, 2.5, 0.5).is_err());
    }

    #[test]
    fn hand_moving_average() {
        let avg = moving_average(&[0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0], 5);
        let expect = [1.0 / 3.0, 0.5, 0.6, 0.6, 0.6, 0.5, 1.0 / 3.0];
        for (a, e) in avg.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12);
        }
        let labels: Vec<u8> = avg.iter().map(|&v| (v >= 0.5) as u8).collect();
        assert_eq!(labels, [0, 1, 1, 1, 1, 1, 0]);
    }

    #[test]
    fn constant_scores_agree_across_modes() {
        let p = SegmentParams::default();
        let mut out = Vec::new();
        for mode in [
            AggregationMode::Tiled,
            AggregationMode::Sliding,
            AggregationMode::Smoothed,
        ] {
            let params = SegmentParams { mode, ..p };
            let track = aggregate(&constant_scores(60.0, mode, 0.7), &params, 60.0).unwrap();
            assert!(track.labels.iter().all(|&l| l));
            out.push(extract_events(&track, 0.5, 0.0));
        }
        assert_eq!(out[0], out[1]);
        assert_eq!(out[1], out[2]);
        assert_eq!((out[0][0].start_s, out[0][0].end_s), (0.0, 60.0));
    }

    #[test]
    fn high_threshold_rejects_everything() {
        let params = SegmentParams {
            mode: AggregationMode::Sliding,
            threshold: 0.9,
            ..SegmentParams::default()
        };
        let track = aggregate(&constant_scores(60.0, AggregationMode::Sliding, 0.85), &params, 60.0).unwrap();
        assert!(track.labels.iter().all(|&l| !l));
    }

    #[test]
    fn run_length_and_merge() {
        let t = track_from_labels(&[true, true, false, true]);
        let ev = extract_events(&t, 0.5, 0.0);
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[0].start_s, ev[0].end_s), (0.0, 1.0));
        assert_eq!((ev[1].start_s, ev[1].end_s), (1.5, 2.0));
        let ev = extract_events(&t, 0.5, 1.0);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start_s, ev[0].end_s), (0.0, 2.0));
        assert!(extract_events(&track_from_labels(&[false; 6]), 0.5, 0.0).is_empty());
    }

    #[test]
    fn min_duration_filters_short_runs() {
        let t = track_from_labels(&[true, false, false, true, true]);
        let ev = extract_events(&t, 1.0, 0.0);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].start_s, 1.5);
    }

    #[test]
    fn mismatched_scores_are_rejected() {
        let params = SegmentParams::default();
        let mut s = constant_scores(60.0, AggregationMode::Smoothed, 0.7);
        s.pop();
        assert!(aggregate(&s, &params, 60.0).is_err());
    }

    #[test]
    fn edge_segments_inherit() {
        let params = SegmentParams {
            mode: AggregationMode::Sliding,
            ..SegmentParams::default()
        };
        let mut s = constant_scores(10.0, AggregationMode::Sliding, 0.2);
        s[0].score = 0.9;
        let last = s.len() - 1;
        s[last].score = 0.8;
        let t = aggregate(&s, &params, 10.0).unwrap();
        assert_eq!(t.scores.len(), 20);
        assert_eq!(&t.scores[..3], &[0.9, 0.9, 0.9]);
        assert_eq!(&t.scores[17..], &[0.8, 0.8, 0.8]);
    }

    #[test]
    fn saturated_score_file_gives_one_event() {
        let scores = constant_scores(30.0, AggregationMode::Smoothed, 1.0);
        let backend = Backend::ScoreFile(crate::classifier::ScoreTable::from_scores(&scores).unwrap());
        let (_, ev) = segment_video(&VideoInput::Duration(30.0), "a", &backend, &SegmentParams::default()).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start_s, ev[0].end_s), (0.0, 30.0));
    }

    #[test]
    fn svg_has_one_lane_per_source() {
        let e = [Event::nns(1.0, 3.0).unwrap()];
        let svg = timeline_svg(&[
            TimelineLane {
                source: "a",
                duration_s: 10.0,
                truth: Some(&e),
                predicted: &e,
            },
            TimelineLane {
                source: "b<1>",
                duration_s: 5.0,
                truth: None,
                predicted: &[],
            },
        ]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("b&lt;1&gt;"));
        assert_eq!(svg.matches("<title>truth").count(), 1);
        assert!(svg.contains(r#"width="20.0""#));
    }
}
