//! Labeled time intervals and the event CSV format
//! (`source,start_s,end_s,label,confidence`).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Nns,
    NonNns,
    Pacifier,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Nns => "nns",
            Label::NonNns => "non-nns",
            Label::Pacifier => "pacifier",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nns" => Ok(Label::Nns),
            "non-nns" | "non_nns" => Ok(Label::NonNns),
            "pacifier" => Ok(Label::Pacifier),
            other => Err(Error::invalid(format!("unknown label `{other}`"))),
        }
    }
}

/// Half-open interval `[start_s, end_s)` with a label and a confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub start_s: f64,
    pub end_s: f64,
    pub label: Label,
    pub confidence: f64,
}

pub type EventList = Vec<Event>;

impl Event {
    pub fn new(start_s: f64, end_s: f64, label: Label, confidence: f64) -> Result<Self> {
        if !(start_s.is_finite() && end_s.is_finite() && start_s < end_s) {
            return Err(Error::invalid(format!(
                "event needs start < end, got [{start_s}, {end_s})"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            start_s,
            end_s,
            label,
            confidence,
        })
    }

    /// An NNS event with confidence 1, e.g. ground truth.
    pub fn nns(start_s: f64, end_s: f64) -> Result<Self> {
        Self::new(start_s, end_s, Label::Nns, 1.0)
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Length of the overlap with `[start, end)`.
    pub fn overlap(&self, start: f64, end: f64) -> f64 {
        (self.end_s.min(end) - self.start_s.max(start)).max(0.0)
    }
}

/// Events grouped by source id, in file order within each source.
pub type EventsBySource = BTreeMap<String, EventList>;

pub const EVENT_HEADER: &str = "source,start_s,end_s,label,confidence";

pub fn format_events_csv(events: &EventsBySource, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
    }
    s.push_str(EVENT_HEADER);
    s.push('\n');
    for (source, list) in events {
        for e in list {
            s.push_str(&format!(
                "{source},{:.3},{:.3},{},{:.6}\n",
                e.start_s, e.end_s, e.label, e.confidence
            ));
        }
    }
    s
}

pub fn write_events_csv(path: &Path, events: &EventsBySource, comment: Option<&str>) -> Result<()> {
    fs::write(path, format_events_csv(events, comment)).map_err(|e| Error::io(path, e))
}

/// Reads an event CSV. Lines starting with `#` are ignored.
pub fn read_events_csv(path: &Path) -> Result<EventsBySource> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events_csv(&text, path)
}

pub(crate) fn parse_events_csv(text: &str, path: &Path) -> Result<EventsBySource> {
    let mut rows = data_lines(text);
    match rows.next() {
        Some((_, h)) if h == EVENT_HEADER => {}
        Some((i, _)) => return Err(Error::parse(path, i, format!("expected header `{EVENT_HEADER}`"))),
        None => return Err(Error::parse(path, 1, "empty event file")),
    }
    let mut out = EventsBySource::new();
    for (i, line) in rows {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(Error::parse(path, i, "expected 5 fields"));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(path, i, format!("bad number `{s}`")))
        };
        let label: Label = f[3].parse().map_err(|e: Error| Error::parse(path, i, e.to_string()))?;
        let event =
            Event::new(num(f[1])?, num(f[2])?, label, num(f[4])?).map_err(|e| Error::parse(path, i, e.to_string()))?;
        out.entry(f[0].to_string()).or_default().push(event);
    }
    Ok(out)
}

/// Non-empty, non-comment lines with 1-based line numbers.
pub(crate) fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_events() {
        assert!(Event::nns(3.0, 3.0).is_err());
        assert!(Event::new(0.0, 1.0, Label::Nns, 1.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut events = EventsBySource::new();
        events.insert(
            "s1/clip0".into(),
            vec![
                Event::new(0.5, 2.0, Label::Nns, 0.75).unwrap(),
                Event::new(4.0, 9.5, Label::Nns, 1.0).unwrap(),
            ],
        );
        events.insert("s2".into(), vec![Event::new(1.0, 2.0, Label::NonNns, 0.0).unwrap()]);
        let text = format_events_csv(&events, Some("config a=1"));
        assert!(text.starts_with("# config a=1\nsource,"));
        assert_eq!(parse_events_csv(&text, Path::new("x")).unwrap(), events);
    }

    #[test]
    fn overlap_length() {
        let e = Event::nns(2.0, 6.0).unwrap();
        assert_eq!(e.overlap(5.0, 10.0), 1.0);
        assert_eq!(e.overlap(6.0, 10.0), 0.0);
    }
}
