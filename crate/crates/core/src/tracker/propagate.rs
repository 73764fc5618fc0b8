use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stabilizer::BoxTrack;
use crate::video_io::FrameSequence;

use super::{display_path, mosse_init, BoundingBox, MosseParams};

/// Sparse frame index → detected face box.
pub type Detections = BTreeMap<usize, BoundingBox>;

/// Spreads sparse detections to every frame with MOSSE.
///
/// Each frame is owned by its nearest detection (ties go to the earlier
/// one); tracking runs forward and backward from every detection through
/// the frames it owns.
pub fn propagate_bbox(seq: &FrameSequence, detections: &Detections, params: &MosseParams) -> Result<BoxTrack> {
    if detections.is_empty() {
        return Err(Error::NoDetections);
    }
    let n = seq.len();
    let (w, h) = (seq.width(), seq.height());
    if let Some((&frame, _)) = detections.range(n..).next() {
        return Err(Error::invalid(format!(
            "detection at frame {frame} but the sequence has {n} frames"
        )));
    }

    let anchors: Vec<(usize, BoundingBox)> = detections.iter().map(|(&f, &b)| (f, b.clamped(w, h))).collect();
    let spans: Vec<(usize, usize, usize, BoundingBox)> = anchors
        .iter()
        .enumerate()
        .map(|(i, &(d, b))| {
            let lo = if i == 0 { 0 } else { (anchors[i - 1].0 + d) / 2 + 1 };
            let hi = if i + 1 == anchors.len() {
                n - 1
            } else {
                (d + anchors[i + 1].0) / 2
            };
            (lo, d, hi, b)
        })
        .collect();

    let pieces: Vec<Vec<(usize, BoundingBox)>> = spans
        .par_iter()
        .map(|&(lo, d, hi, bbox)| -> Result<Vec<(usize, BoundingBox)>> {
            let frames = seq.frames();
            let mut out = vec![(d, bbox)];
            let mut fwd = mosse_init(&frames[d], bbox, params)?;
            for (f, frame) in frames.iter().enumerate().take(hi + 1).skip(d + 1) {
                let (b, _) = fwd.update(frame)?;
                out.push((f, b));
            }
            let mut bwd = mosse_init(&frames[d], bbox, params)?;
            for f in (lo..d).rev() {
                let (b, _) = bwd.update(&frames[f])?;
                out.push((f, b));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut boxes: Vec<Option<BoundingBox>> = vec![None; n];
    for (f, b) in pieces.into_iter().flatten() {
        debug_assert!(boxes[f].is_none(), "frame {f} assigned twice");
        boxes[f] = Some(b.clamped(w, h));
    }
    let boxes = boxes
        .into_iter()
        .map(|b| b.expect("every frame is owned by one detection"))
        .collect();
    Ok(BoxTrack::from_boxes(boxes))
}

/// Reads a `frame,x,y,w,h` detections file.
pub fn read_detections(path: &Path) -> Result<Detections> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match rows.next() {
        Some((_, header)) if header.trim() == "frame,x,y,w,h" => {}
        Some((i, _)) => return Err(Error::parse(path, i + 1, "expected header `frame,x,y,w,h`")),
        None => return Err(Error::parse(path, 1, "empty detections file")),
    }
    let mut out = Detections::new();
    for (i, line) in rows {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::parse(path, i + 1, "expected 5 fields"));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad frame index `{}`", fields[0])))?;
        let mut v = [0f32; 4];
        for (slot, s) in v.iter_mut().zip(&fields[1..]) {
            *slot = s
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad number `{s}`")))?;
        }
        let bbox = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if out.insert(frame, bbox).is_some() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("duplicate detection for frame {frame} in {}", display_path(path)),
            ));
        }
    }
    Ok(out)
}

pub fn write_detections(path: &Path, detections: &Detections, comment: Option<&str>) -> Result<()> {
    let mut s = String::new();
    for line in comment.into_iter().flat_map(str::lines) {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str("frame,x,y,w,h\n");
    for (f, b) in detections {
        s.push_str(&format!("{f},{},{},{},{}\n", b.x, b.y, b.w, b.h));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::value_noise;
    use crate::video_io::Frame;

    fn static_seq(n: usize) -> FrameSequence {
        let f = Frame::from_fn(96, 96, |x, y| value_noise(x as f32, y as f32, 5, 5.0));
        FrameSequence::new(vec![f; n], 10.0).unwrap()
    }

    #[test]
    fn static_scene_keeps_one_box() {
        let seq = static_seq(12);
        let b = BoundingBox::new(24.0, 24.0, 40.0, 40.0).unwrap();
        let det = Detections::from([(0, b)]);
        let track = propagate_bbox(&seq, &det, &MosseParams::default()).unwrap();
        assert_eq!(track.boxes.len(), 12);
        for got in &track.boxes {
            assert!((got.x - b.x).abs() < 0.5 && (got.y - b.y).abs() < 0.5, "{got}");
        }
    }

    #[test]
    fn empty_detections_error() {
        let seq = static_seq(3);
        assert!(matches!(
            propagate_bbox(&seq, &Detections::new(), &MosseParams::default()),
            Err(Error::NoDetections)
        ));
    }

    #[test]
    fn detections_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        let det = Detections::from([
            (0, BoundingBox::new(1.0, 2.0, 30.0, 40.5).unwrap()),
            (7, BoundingBox::new(3.25, 2.0, 30.0, 40.0).unwrap()),
        ]);
        write_detections(&path, &det, Some("from a test")).unwrap();
        assert_eq!(read_detections(&path).unwrap(), det);
    }

    #[test]
    fn detections_csv_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("det.csv");
        fs::write(&path, "f,x,y,w,h\n0,1,1,10,10\n").unwrap();
        assert!(matches!(read_detections(&path), Err(Error::Parse { .. })));
    }
}
