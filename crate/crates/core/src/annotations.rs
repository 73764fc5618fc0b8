//! Coder annotations and the clip-sampling protocol used to build
//! classification and segmentation sets.
//!
//! Annotation CSV:
//!
//! ```text
//! #duration_s=3600
//! subject,coder,label,start_s,end_s
//! infant01,c1,nns,12.5,18.0
//! infant01,c1,pacifier,10.0,95.0
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::events::{data_lines, Event, EventList, Label};

pub const ANNOTATION_HEADER: &str = "subject,coder,label,start_s,end_s";
pub const MANIFEST_HEADER: &str = "source,start_s,length_s,class";

/// Redraws allowed per clip before sampling of that class stops.
pub const MAX_REDRAWS: usize = 1000;

/// One coder's events for one subject's recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub subject: String,
    pub coder: String,
    pub duration_s: f64,
    pub events: EventList,
}

impl AnnotationSet {
    /// Validates and sorts the events.
    pub fn new(
        subject: impl Into<String>,
        coder: impl Into<String>,
        duration_s: f64,
        mut events: EventList,
    ) -> Result<Self> {
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
        }
        for e in &events {
            if !matches!(e.label, Label::Nns | Label::Pacifier) {
                return Err(Error::invalid(format!(
                    "annotation label must be nns or pacifier, got {}",
                    e.label
                )));
            }
            if e.start_s < 0.0 || e.end_s > duration_s {
                return Err(Error::invalid(format!(
                    "event [{}, {}) exceeds the recording [0, {duration_s})",
                    e.start_s, e.end_s
                )));
            }
        }
        events.sort_by(|a, b| a.label.cmp(&b.label).then(a.start_s.total_cmp(&b.start_s)));
        for pair in events.windows(2) {
            if pair[0].label == pair[1].label && pair[1].start_s < pair[0].end_s {
                return Err(Error::invalid(format!(
                    "overlapping {} events [{}, {}) and [{}, {})",
                    pair[0].label, pair[0].start_s, pair[0].end_s, pair[1].start_s, pair[1].end_s
                )));
            }
        }
        Ok(Self {
            subject: subject.into(),
            coder: coder.into(),
            duration_s,
            events,
        })
    }

    pub fn events_with(&self, label: Label) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.label == label)
    }

    pub fn nns_events(&self) -> EventList {
        self.events_with(Label::Nns).copied().collect()
    }
}

/// Parses an annotation CSV. All rows must share one subject and coder.
pub fn parse_annotations(path: &Path) -> Result<AnnotationSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations_str(&text, path)
}

pub(crate) fn parse_annotations_str(text: &str, path: &Path) -> Result<AnnotationSet> {
    let first = text.lines().next().unwrap_or("").trim();
    let duration_s: f64 = first
        .strip_prefix("#duration_s=")
        .ok_or_else(|| Error::parse(path, 1, "first line must be `#duration_s=<decimal>`"))?
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, 1, "bad duration"))?;

    let mut rows = data_lines(text);
    match rows.next() {
        Some((_, h)) if h == ANNOTATION_HEADER => {}
        Some((i, _)) => return Err(Error::parse(path, i, format!("expected header `{ANNOTATION_HEADER}`"))),
        None => return Err(Error::parse(path, 2, "missing header")),
    }
    let mut subject: Option<String> = None;
    let mut coder: Option<String> = None;
    let mut events = Vec::new();
    for (i, line) in rows {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(path, i, "expected 5 fields"));
        }
        for (slot, value, what) in [(&mut subject, f[0], "subject"), (&mut coder, f[1], "coder")] {
            match slot {
                Some(s) if s != value => {
                    return Err(Error::parse(path, i, format!("mixed {what} ids `{s}` and `{value}`")));
                }
                Some(_) => {}
                None => *slot = Some(value.to_string()),
            }
        }
        let label: Label = f[2].parse().map_err(|e: Error| Error::parse(path, i, e.to_string()))?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, i, format!("bad number `{s}`")))
        };
        let (start, end) = (num(f[3])?, num(f[4])?);
        if start >= end {
            return Err(Error::parse(path, i, format!("start {start} is not before end {end}")));
        }
        events.push(Event::new(start, end, label, 1.0).map_err(|e| Error::parse(path, i, e.to_string()))?);
    }
    AnnotationSet::new(
        subject.unwrap_or_default(),
        coder.unwrap_or_default(),
        duration_s,
        events,
    )
    .map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn format_annotations(set: &AnnotationSet, comment: Option<&str>) -> String {
    let mut s = format!("#duration_s={}\n", set.duration_s);
    if let Some(c) = comment {
        for line in c.lines() {
            s.push_str(&format!("# {line}\n"));
        }
    }
    s.push_str(ANNOTATION_HEADER);
    s.push('\n');
    for e in &set.events {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            set.subject, set.coder, e.label, e.start_s, e.end_s
        ));
    }
    s
}

pub fn write_annotations(path: &Path, set: &AnnotationSet, comment: Option<&str>) -> Result<()> {
    fs::write(path, format_annotations(set, comment)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClipClass {
    Nns,
    NonNns,
    Mixed,
}

impl ClipClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ClipClass::Nns => "nns",
            ClipClass::NonNns => "non-nns",
            ClipClass::Mixed => "mixed",
        }
    }
}

impl fmt::Display for ClipClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClipClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nns" => Ok(ClipClass::Nns),
            "non-nns" => Ok(ClipClass::NonNns),
            "mixed" => Ok(ClipClass::Mixed),
            other => Err(Error::invalid(format!("unknown clip class `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipEntry {
    pub source: String,
    pub start_s: f64,
    pub length_s: f64,
    pub class: ClipClass,
}

impl ClipEntry {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.length_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClipManifest {
    pub entries: Vec<ClipEntry>,
    pub seed: u64,
}

impl ClipManifest {
    pub fn count(&self, class: ClipClass) -> usize {
        self.entries.iter().filter(|e| e.class == class).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplePolicy {
    /// Short clips entirely inside NNS (positives) or clear of it
    /// (negatives).
    Classification { n_pos: usize, n_neg: usize, clip_s: f64 },
    /// Long clips containing at least one NNS start or end.
    Segmentation { n_mixed: usize, clip_s: f64 },
}

impl SamplePolicy {
    pub fn classification(n_pos: usize, n_neg: usize) -> Self {
        SamplePolicy::Classification {
            n_pos,
            n_neg,
            clip_s: 2.5,
        }
    }

    pub fn segmentation(n_mixed: usize) -> Self {
        SamplePolicy::Segmentation { n_mixed, clip_s: 60.0 }
    }
}

const EPS: f64 = 1e-9;

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// `base` minus the union of `holes`, as sorted disjoint intervals.
fn subtract(base: &[(f64, f64)], holes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a, b) in base {
        let mut pieces = vec![(a, b)];
        for &(h0, h1) in holes {
            pieces = pieces
                .into_iter()
                .flat_map(|(p0, p1)| {
                    let mut v = Vec::with_capacity(2);
                    if h1 <= p0 || h0 >= p1 {
                        v.push((p0, p1));
                    } else {
                        if h0 > p0 {
                            v.push((p0, h0));
                        }
                        if h1 < p1 {
                            v.push((h1, p1));
                        }
                    }
                    v
                })
                .collect();
        }
        out.extend(pieces);
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    out
}

fn merge(mut ranges: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ranges.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.0 <= last.1 => last.1 = last.1.max(r.1),
            _ => out.push(r),
        }
    }
    out
}

/// Uniform draw over the union of closed start ranges; zero-length ranges
/// are only used when no range has positive length.
fn draw_start(ranges: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Option<f64> {
    let total: f64 = ranges.iter().map(|r| r.1 - r.0).sum();
    if total > EPS {
        let mut u = rng.random_range(0.0..total);
        for r in ranges {
            let len = r.1 - r.0;
            if u < len {
                return Some(r.0 + u);
            }
            u -= len;
        }
        ranges.last().map(|r| r.1)
    } else if !ranges.is_empty() {
        Some(ranges[rng.random_range(0..ranges.len())].0)
    } else {
        None
    }
}

fn sample_class(
    source: &str,
    class: ClipClass,
    count: usize,
    clip_s: f64,
    ranges: &[(f64, f64)],
    valid: impl Fn(f64) -> bool,
    rng: &mut ChaCha8Rng,
) -> Vec<ClipEntry> {
    let mut starts: Vec<f64> = Vec::with_capacity(count);
    'clips: for _ in 0..count {
        for _ in 0..MAX_REDRAWS {
            let Some(raw) = draw_start(ranges, rng) else {
                break 'clips;
            };
            let start = round_ms(raw);
            if valid(start) && !starts.iter().any(|s| (s - start).abs() < 5e-4) {
                starts.push(start);
                continue 'clips;
            }
        }
        break;
    }
    starts.sort_by(f64::total_cmp);
    starts
        .into_iter()
        .map(|start_s| ClipEntry {
            source: source.to_string(),
            start_s,
            length_s: clip_s,
            class,
        })
        .collect()
}

/// Draws clips for the classification or segmentation task.
///
/// Starts are uniform over the admissible set and rounded to milliseconds;
/// a draw that is invalid after rounding or duplicates an earlier start is
/// redrawn, at most [`MAX_REDRAWS`] times per clip, after which the class
/// is returned short.
pub fn sample_clips(ann: &AnnotationSet, policy: &SamplePolicy, seed: u64) -> ClipManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nns: Vec<(f64, f64)> = ann.events_with(Label::Nns).map(|e| (e.start_s, e.end_s)).collect();
    let duration = ann.duration_s;
    let mut entries = Vec::new();

    match *policy {
        SamplePolicy::Classification { n_pos, n_neg, clip_s } => {
            let pos_ranges: Vec<(f64, f64)> = nns
                .iter()
                .filter(|(s, e)| e - s >= clip_s - EPS)
                .map(|&(s, e)| (s, (e - clip_s).max(s)))
                .collect();
            let inside_nns = |t: f64| nns.iter().any(|&(s, e)| t >= s - EPS && t + clip_s <= e + EPS);
            entries.extend(sample_class(
                &ann.subject,
                ClipClass::Nns,
                n_pos,
                clip_s,
                &pos_ranges,
                inside_nns,
                &mut rng,
            ));

            let pacifier: Vec<(f64, f64)> = ann.events_with(Label::Pacifier).map(|e| (e.start_s, e.end_s)).collect();
            let allowed = if pacifier.is_empty() {
                vec![(0.0, duration)]
            } else {
                pacifier.clone()
            };
            let free = subtract(&allowed, &nns);
            let neg_ranges: Vec<(f64, f64)> = free
                .iter()
                .filter(|(a, b)| b - a >= clip_s - EPS)
                .map(|&(a, b)| (a, (b - clip_s).max(a)))
                .collect();
            let clear_of_nns = |t: f64| {
                let end = t + clip_s;
                let in_allowed = allowed.iter().any(|&(a, b)| t >= a - EPS && end <= b + EPS);
                in_allowed && nns.iter().all(|&(s, e)| e <= t + EPS || s >= end - EPS)
            };
            entries.extend(sample_class(
                &ann.subject,
                ClipClass::NonNns,
                n_neg,
                clip_s,
                &neg_ranges,
                clear_of_nns,
                &mut rng,
            ));
        }
        SamplePolicy::Segmentation { n_mixed, clip_s } => {
            let last_start = duration - clip_s;
            let boundaries: Vec<f64> = nns
                .iter()
                .flat_map(|&(s, e)| [s, e])
                .filter(|&b| b > EPS && b < duration - EPS)
                .collect();
            let ranges = if last_start < -EPS {
                Vec::new()
            } else {
                merge(
                    boundaries
                        .iter()
                        .map(|&b| ((b - clip_s).max(0.0), b.min(last_start)))
                        .filter(|(a, b)| b >= a)
                        .collect(),
                )
            };
            let has_transition = |t: f64| {
                t >= -EPS && t <= last_start + EPS && boundaries.iter().any(|&b| b > t + EPS && b < t + clip_s - EPS)
            };
            entries.extend(sample_class(
                &ann.subject,
                ClipClass::Mixed,
                n_mixed,
                clip_s,
                &ranges,
                has_transition,
                &mut rng,
            ));
        }
    }
    ClipManifest { entries, seed }
}

pub fn format_manifest(manifest: &ClipManifest, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            s.push_str(&format!("# {line}\n"));
        }
    }
    s.push_str(MANIFEST_HEADER);
    s.push('\n');
    for e in &manifest.entries {
        s.push_str(&format!("{},{:.3},{},{}\n", e.source, e.start_s, e.length_s, e.class));
    }
    s
}

pub fn write_manifest(path: &Path, manifest: &ClipManifest, comment: Option<&str>) -> Result<()> {
    fs::write(path, format_manifest(manifest, comment)).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ClipEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = data_lines(&text);
    match rows.next() {
        Some((_, h)) if h == MANIFEST_HEADER => {}
        Some((i, _)) => return Err(Error::parse(path, i, format!("expected header `{MANIFEST_HEADER}`"))),
        None => return Err(Error::parse(path, 1, "empty manifest")),
    }
    rows.map(|(i, line)| {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(Error::parse(path, i, "expected 4 fields"));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, i, format!("bad number `{s}`")))
        };
        Ok(ClipEntry {
            source: f[0].to_string(),
            start_s: num(f[1])?,
            length_s: num(f[2])?,
            class: f[3].parse().map_err(|e: Error| Error::parse(path, i, e.to_string()))?,
        })
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(events: &[(f64, f64, Label)], duration: f64) -> AnnotationSet {
        AnnotationSet::new(
            "inf01",
            "c1",
            duration,
            events
                .iter()
                .map(|&(s, e, l)| Event::new(s, e, l, 1.0).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parses_two_disjoint_events() {
        let text = "#duration_s=100\nsubject,coder,label,start_s,end_s\ninf01,c1,nns,1,5\ninf01,c1,nns,7,9\n";
        let ann = parse_annotations_str(text, Path::new("a.csv")).unwrap();
        assert_eq!(ann.events.len(), 2);
        assert_eq!(ann.subject, "inf01");
        assert_eq!(ann.duration_s, 100.0);
    }

    #[test]
    fn rejects_same_label_overlap() {
        let text = "#duration_s=100\nsubject,coder,label,start_s,end_s\ninf01,c1,nns,0,5\ninf01,c1,nns,4,8\n";
        let err = parse_annotations_str(text, Path::new("a.csv")).unwrap_err();
        assert!(err.to_string().contains("overlapping"), "{err}");
    }

    #[test]
    fn different_labels_may_overlap() {
        let ann = set(&[(0.0, 5.0, Label::Nns), (0.0, 50.0, Label::Pacifier)], 60.0);
        assert_eq!(ann.events.len(), 2);
    }

    #[test]
    fn rejects_malformed_rows() {
        let cases = [
            "#duration_s=10\nsubject,coder,label,start_s,end_s\ninf01,c1,nns,5,2\n",
            "#duration_s=10\nsubject,coder,label,start_s,end_s\ninf01,c1,nns,5\n",
            "#duration_s=10\nsubject,coder,label,start_s,end_s\ninf01,c1,nns,5,12\n",
            "#duration_s=10\nsubject,coder,label,start_s,end_s\ninf01,c1,cry,1,2\n",
            "subject,coder,label,start_s,end_s\ninf01,c1,nns,1,2\n",
        ];
        for text in cases {
            assert!(parse_annotations_str(text, Path::new("a.csv")).is_err(), "{text}");
        }
    }

    #[test]
    fn write_then_parse_round_trip() {
        let ann = set(
            &[
                (1.25, 5.5, Label::Nns),
                (7.0, 9.125, Label::Nns),
                (0.0, 30.0, Label::Pacifier),
            ],
            42.5,
        );
        let text = format_annotations(&ann, Some("generated"));
        assert_eq!(parse_annotations_str(&text, Path::new("a.csv")).unwrap(), ann);
    }

    #[test]
    fn eighty_positives_inside_long_event() {
        let ann = set(&[(100.0, 400.0, Label::Nns)], 600.0);
        let m = sample_clips(&ann, &SamplePolicy::classification(80, 0), 7);
        assert_eq!(m.count(ClipClass::Nns), 80);
        for e in &m.entries {
            assert!(e.start_s >= 100.0 && e.end_s() <= 400.0);
        }
    }

    #[test]
    fn no_supply_gives_no_positives() {
        let ann = set(&[], 600.0);
        let m = sample_clips(&ann, &SamplePolicy::classification(10, 3), 7);
        assert_eq!(m.count(ClipClass::Nns), 0);
        assert_eq!(m.count(ClipClass::NonNns), 3);
    }

    #[test]
    fn negatives_prefer_pacifier_periods() {
        let ann = set(&[(20.0, 30.0, Label::Nns), (10.0, 50.0, Label::Pacifier)], 600.0);
        let m = sample_clips(&ann, &SamplePolicy::classification(0, 40), 3);
        assert_eq!(m.count(ClipClass::NonNns), 40);
        for e in &m.entries {
            assert!(e.start_s >= 10.0 && e.end_s() <= 50.0);
            assert!(e.end_s() <= 20.0 || e.start_s >= 30.0);
        }
    }

    #[test]
    fn short_supply_truncates() {
        // Exactly one admissible start.
        let ann = set(&[(10.0, 12.5, Label::Nns)], 60.0);
        let m = sample_clips(&ann, &SamplePolicy::classification(5, 0), 1);
        assert_eq!(m.count(ClipClass::Nns), 1);
        assert_eq!(m.entries[0].start_s, 10.0);
    }

    #[test]
    fn mixed_clips_contain_a_transition() {
        let ann = set(&[(100.0, 110.0, Label::Nns), (300.0, 306.0, Label::Nns)], 600.0);
        let m = sample_clips(&ann, &SamplePolicy::segmentation(5), 11);
        assert_eq!(m.count(ClipClass::Mixed), 5);
        for e in &m.entries {
            let has = [100.0, 110.0, 300.0, 306.0]
                .iter()
                .any(|&b| b > e.start_s && b < e.end_s());
            assert!(has, "{e:?}");
            assert!(e.end_s() <= 600.0);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let ann = set(&[(100.0, 400.0, Label::Nns)], 600.0);
        let p = SamplePolicy::classification(20, 20);
        assert_eq!(sample_clips(&ann, &p, 5), sample_clips(&ann, &p, 5));
        assert_ne!(sample_clips(&ann, &p, 5), sample_clips(&ann, &p, 6));
    }

    #[test]
    fn manifest_round_trip() {
        let ann = set(&[(100.0, 400.0, Label::Nns)], 600.0);
        let m = sample_clips(&ann, &SamplePolicy::classification(4, 4), 5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_manifest(&p, &m, None).unwrap();
        assert_eq!(read_manifest(&p).unwrap(), m.entries);
    }
}
