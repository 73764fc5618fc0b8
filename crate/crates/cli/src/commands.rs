use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use nns_core::annotations::{
    parse_annotations, read_manifest, sample_clips, write_manifest, ClipClass, ClipEntry, ClipManifest, SamplePolicy,
};
use nns_core::classifier::{
    classify_window, extract_features, read_scores, train_baseline, write_baseline, write_scores, Backend, Window,
    WindowScore,
};
use nns_core::events::{read_events_csv, write_events_csv, EventsBySource, Label};
use nns_core::metrics::{ap_ar_report, binary_accuracy, cohen_kappa_incidence, SubjectClips};
use nns_core::optical_flow::{clip_flow_encode, load_flow_dir, write_flow_dir, HsvFrame};
use nns_core::pipeline::stabilize;
use nns_core::segmenter::{
    aggregate, extract_events, score_windows, timeline_svg, window_frames, SegmentTrack, TimelineLane, VideoInput,
    WindowSpec,
};
use nns_core::stabilizer::augment;
use nns_core::synth::{format_spec, generate_video, parse_spec, write_synth_output, SynthSpec};
use nns_core::tracker::read_detections;
use nns_core::video_io::{load_sequence, write_sequence, FrameFormat};
use nns_core::Event;

use crate::config::Config;
use crate::{CliError, Command};

type CliResult<T> = Result<T, CliError>;

pub fn dispatch(command: Command, cfg: &Config) -> CliResult<()> {
    match command {
        Command::Synth { spec, out } => synth(cfg, spec.as_deref(), &out),
        Command::Stabilize {
            frames,
            detections,
            out,
        } => stabilize_cmd(cfg, &frames, &detections, &out),
        Command::Flow {
            frames,
            detections,
            out,
        } => flow(cfg, &frames, detections.as_deref(), &out),
        Command::Classify {
            flow,
            source,
            manifest,
            train,
            flow_root,
            model_out,
            out,
        } => match (train, manifest, flow) {
            (Some(train), _, _) => train_cmd(
                cfg,
                &train,
                &flow_root.expect("clap requires --flow-root"),
                &model_out.expect("clap requires --model-out"),
            ),
            (None, Some(manifest), _) => classify_manifest(
                cfg,
                &manifest,
                &flow_root.expect("clap requires --flow-root"),
                &out.expect("clap requires --out"),
            ),
            (None, None, Some(flow)) => {
                classify_video(cfg, &flow, source.as_deref(), &out.expect("clap requires --out"))
            }
            (None, None, None) => Err(CliError::Invalid(
                "classify needs one of --flow, --manifest or --train".into(),
            )),
        },
        Command::Segment {
            flow,
            duration,
            out,
            scores_out,
            svg,
            gt,
        } => segment(cfg, &flow, duration, &out, scores_out.as_deref(), svg.as_deref(), &gt),
        Command::Evaluate { pred, gt, out } => evaluate(cfg, &pred, &gt, &out),
        Command::SampleClips { annotations, out } => sample(cfg, &annotations, &out),
        Command::Kappa { a, b, out } => kappa(cfg, &a, &b, out.as_deref()),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn comment_lines(header: &str) -> String {
    header.lines().map(|l| format!("# {l}\n")).collect()
}

fn dir_name(path: &Path) -> CliResult<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Invalid(format!("cannot name a source after `{}`", path.display())))
}

fn synth(cfg: &Config, spec_path: Option<&Path>, out: &Path) -> CliResult<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            parse_spec(&text, p)?
        }
        None => SynthSpec::default(),
    };
    if cfg.is_explicit("seed") || spec_path.is_none() {
        spec.seed = cfg.u64("seed")?;
    }
    let video = generate_video(&spec)?;
    let header = format!("{}\n{}", cfg.header("synth"), format_spec(&spec).trim_end());
    write_synth_output(&video, out, Some(&header))?;
    write_text(&out.join("spec.txt"), &format_spec(&spec))?;
    println!(
        "synth: {} frames, {} bursts -> {}",
        video.frames.len(),
        video.bursts.len(),
        out.display()
    );
    Ok(())
}

fn stabilize_cmd(cfg: &Config, frames: &Path, detections: &Path, out: &Path) -> CliResult<()> {
    let seq = load_sequence(frames, cfg.f64("fps")?)?;
    let det = read_detections(detections)?;
    let params = cfg.preprocess()?;
    let (track, mut crops) = stabilize(&seq, &det, &params)?;
    if let Some(aug) = cfg.augment()? {
        crops = augment(&crops, &aug)?;
    }
    write_sequence(&crops, &out.join("frames"), FrameFormat::Pgm)?;

    let mut s = comment_lines(&cfg.header("stabilize"));
    s.push_str("frame,x,y,w,h,raw_dx,raw_dy,smooth_dx,smooth_dy,crop_x,crop_y\n");
    let stab = track.stabilized_boxes();
    for (i, b) in track.boxes.iter().enumerate() {
        let (r, m, c) = (track.raw.offsets[i], track.smoothed.offsets[i], stab[i]);
        let _ = writeln!(
            s,
            "{i},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            b.x, b.y, b.w, b.h, r[0], r[1], m[0], m[1], c.x, c.y
        );
    }
    write_text(&out.join("track.csv"), &s)?;
    println!("stabilize: {} crops -> {}", crops.len(), out.display());
    Ok(())
}

fn flow(cfg: &Config, frames: &Path, detections: Option<&Path>, out: &Path) -> CliResult<()> {
    let seq = load_sequence(frames, cfg.f64("fps")?)?;
    let params = cfg.preprocess()?;
    let input = match detections {
        Some(d) => {
            let (_, crops) = stabilize(&seq, &read_detections(d)?, &params)?;
            match cfg.augment()? {
                Some(aug) => augment(&crops, &aug)?,
                None => crops,
            }
        }
        None => seq,
    };
    let encoded = clip_flow_encode(&input, &params.flow, params.norm)?;
    write_flow_dir(out, &encoded, input.fps())?;
    write_text(&out.join("config.txt"), &comment_lines(&cfg.header("flow")))?;
    println!("flow: {} fields -> {}", encoded.len(), out.display());
    Ok(())
}

/// HSV frames and frame rate of a flow directory.
fn load_hsv(cfg: &Config, dir: &Path) -> CliResult<(Vec<HsvFrame>, f64)> {
    let (seq, fps) = load_flow_dir(dir, cfg.f64("fps")?, cfg.hsv_norm()?)?;
    Ok((seq.hsv_frames, fps))
}

/// Flow for every source a manifest mentions, loaded once each.
fn load_manifest_flows(
    cfg: &Config,
    entries: &[ClipEntry],
    root: &Path,
) -> CliResult<BTreeMap<String, (Vec<HsvFrame>, f64)>> {
    let mut sources: Vec<&str> = entries.iter().map(|e| e.source.as_str()).collect();
    sources.sort_unstable();
    sources.dedup();
    sources
        .into_iter()
        .map(|s| Ok((s.to_string(), load_hsv(cfg, &root.join(s))?)))
        .collect()
}

fn clip_window(entry: &ClipEntry, flows: &BTreeMap<String, (Vec<HsvFrame>, f64)>) -> Window {
    let (hsv, fps) = &flows[&entry.source];
    let spec = WindowSpec {
        start_s: entry.start_s,
        end_s: entry.end_s(),
        assign_start_s: entry.start_s,
        assign_end_s: entry.end_s(),
    };
    Window {
        source: entry.source.clone(),
        start_s: entry.start_s,
        end_s: entry.end_s(),
        hsv_frames: window_frames(hsv, *fps, &spec),
    }
}

fn binary_entries(path: &Path) -> CliResult<Vec<ClipEntry>> {
    let entries = read_manifest(path)?;
    if entries.iter().any(|e| e.class == ClipClass::Mixed) {
        return Err(CliError::Invalid(format!(
            "{}: mixed clips cannot be used as labelled windows",
            path.display()
        )));
    }
    if entries.is_empty() {
        return Err(CliError::Invalid(format!(
            "{}: manifest lists no clips",
            path.display()
        )));
    }
    Ok(entries)
}

fn train_cmd(cfg: &Config, manifest: &Path, root: &Path, model_out: &Path) -> CliResult<()> {
    let entries = binary_entries(manifest)?;
    let flows = load_manifest_flows(cfg, &entries, root)?;
    let examples: Vec<(Vec<f64>, bool)> = entries
        .par_iter()
        .map(|e| {
            (
                extract_features(&clip_window(e, &flows)).to_vec(),
                e.class == ClipClass::Nns,
            )
        })
        .collect();
    let model = train_baseline(&examples, &cfg.train()?)?;
    write_baseline(model_out, &model, Some(&cfg.header("classify --train")))?;
    let correct = examples.iter().filter(|(x, y)| (model.score(x) >= 0.5) == *y).count();
    println!(
        "classify: trained on {} clips, training accuracy {:.4} -> {}",
        examples.len(),
        correct as f64 / examples.len() as f64,
        model_out.display()
    );
    Ok(())
}

fn load_backend(cfg: &Config) -> CliResult<Backend> {
    let spec = cfg.get("backend");
    if spec.is_empty() {
        return Err(CliError::Invalid("no backend configured (--backend)".into()));
    }
    Ok(Backend::load(spec)?)
}

fn classify_manifest(cfg: &Config, manifest: &Path, root: &Path, out: &Path) -> CliResult<()> {
    let entries = binary_entries(manifest)?;
    let backend = load_backend(cfg)?;
    let flows = if backend.needs_frames() {
        load_manifest_flows(cfg, &entries, root)?
    } else {
        BTreeMap::new()
    };
    let scores: Vec<WindowScore> = entries
        .par_iter()
        .map(|e| {
            let w = if backend.needs_frames() {
                clip_window(e, &flows)
            } else {
                Window {
                    source: e.source.clone(),
                    start_s: e.start_s,
                    end_s: e.end_s(),
                    hsv_frames: Vec::new(),
                }
            };
            classify_window(&backend, &w)
        })
        .collect::<Result<_, _>>()?;
    write_scores(out, &scores, Some(&cfg.header("classify")))?;
    let labels: Vec<bool> = entries.iter().map(|e| e.class == ClipClass::Nns).collect();
    let acc = binary_accuracy(&scores, &labels, cfg.f64("threshold")?)?;
    println!(
        "classify: {} clips, accuracy {acc:.4} -> {}",
        scores.len(),
        out.display()
    );
    Ok(())
}

fn classify_video(cfg: &Config, flow: &Path, source: Option<&str>, out: &Path) -> CliResult<()> {
    let backend = load_backend(cfg)?;
    let source = match source {
        Some(s) => s.to_string(),
        None => dir_name(flow)?,
    };
    let (hsv, fps) = load_hsv(cfg, flow)?;
    let scores = score_windows(&VideoInput::Flow { hsv: &hsv, fps }, &source, &backend, &cfg.segment()?)?;
    write_scores(out, &scores, Some(&cfg.header("classify")))?;
    println!("classify: {} windows -> {}", scores.len(), out.display());
    Ok(())
}

/// Ground truth from an events CSV or an annotation CSV (keyed by its
/// subject), NNS events only.
fn read_truth(paths: &[PathBuf]) -> CliResult<EventsBySource> {
    let mut out = EventsBySource::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
        let part: EventsBySource = if text.starts_with("#duration_s=") {
            let ann = parse_annotations(p)?;
            BTreeMap::from([(ann.subject.clone(), ann.nns_events())])
        } else {
            read_events_csv(p)?
        };
        for (source, events) in part {
            let slot = out.entry(source).or_default();
            slot.extend(events.into_iter().filter(|e| e.label == Label::Nns));
            slot.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        }
    }
    Ok(out)
}

fn segment(
    cfg: &Config,
    flows: &[PathBuf],
    duration: Option<f64>,
    out: &Path,
    scores_out: Option<&Path>,
    svg: Option<&Path>,
    gt: &[PathBuf],
) -> CliResult<()> {
    let params = cfg.segment()?;
    let backend = load_backend(cfg)?;
    let mut tracks: Vec<(SegmentTrack, Vec<Event>)> = Vec::new();
    let mut all_scores: Vec<WindowScore> = Vec::new();

    if flows.is_empty() {
        let path = cfg
            .get("backend")
            .strip_prefix("scorefile:")
            .ok_or_else(|| CliError::Invalid("segment without --flow needs a scorefile: backend".into()))?;
        let mut ends: BTreeMap<String, f64> = BTreeMap::new();
        for s in read_scores(Path::new(path))? {
            let e = ends.entry(s.source).or_insert(0.0);
            *e = e.max(s.end_s);
        }
        if ends.is_empty() {
            return Err(CliError::Invalid(format!("{path}: no scores")));
        }
        for (source, end) in ends {
            let dur = duration.unwrap_or(end);
            let input = VideoInput::Duration(dur);
            let scores = score_windows(&input, &source, &backend, &params)?;
            tracks.push(finish_track(&scores, &source, &params, dur)?);
            all_scores.extend(scores);
        }
    } else {
        for dir in flows {
            let source = dir_name(dir)?;
            let (hsv, fps) = load_hsv(cfg, dir)?;
            let input = VideoInput::Flow { hsv: &hsv, fps };
            let scores = score_windows(&input, &source, &backend, &params)?;
            tracks.push(finish_track(&scores, &source, &params, input.duration_s())?);
            all_scores.extend(scores);
        }
    }

    let header = cfg.header("segment");
    let mut by_source = EventsBySource::new();
    for (track, events) in &tracks {
        by_source.insert(track.source.clone(), events.clone());
    }
    write_events_csv(out, &by_source, Some(&header))?;
    if let Some(p) = scores_out {
        write_scores(p, &all_scores, Some(&header))?;
    }
    if let Some(p) = svg {
        let truth = read_truth(gt)?;
        let lanes: Vec<TimelineLane<'_>> = tracks
            .iter()
            .map(|(track, events)| TimelineLane {
                source: &track.source,
                duration_s: track.duration_s,
                truth: if gt.is_empty() {
                    None
                } else {
                    Some(truth.get(&track.source).map_or(&[][..], |v| v.as_slice()))
                },
                predicted: events,
            })
            .collect();
        write_text(p, &timeline_svg(&lanes))?;
    }
    let n: usize = by_source.values().map(Vec::len).sum();
    println!("segment: {} sources, {n} events -> {}", by_source.len(), out.display());
    Ok(())
}

fn finish_track(
    scores: &[WindowScore],
    source: &str,
    params: &nns_core::SegmentParams,
    duration: f64,
) -> CliResult<(SegmentTrack, Vec<Event>)> {
    let mut track = aggregate(scores, params, duration)?;
    track.source = source.to_string();
    let events = extract_events(&track, params.min_dur_s, params.merge_gap_s);
    Ok((track, events))
}

fn subject_of(source: &str) -> &str {
    source.split('/').next().unwrap_or(source)
}

fn evaluate(cfg: &Config, pred: &Path, gt: &[PathBuf], out: &Path) -> CliResult<()> {
    let pred: EventsBySource = read_events_csv(pred)?
        .into_iter()
        .map(|(s, ev)| (s, ev.into_iter().filter(|e| e.label == Label::Nns).collect()))
        .collect();
    let truth = read_truth(gt)?;
    let mut sources: Vec<&String> = pred.keys().chain(truth.keys()).collect();
    sources.sort();
    sources.dedup();
    let mut per_subject: BTreeMap<String, SubjectClips> = BTreeMap::new();
    for s in sources {
        let p = pred.get(s).cloned().unwrap_or_default();
        let g = truth.get(s).cloned().unwrap_or_default();
        per_subject.entry(subject_of(s).to_string()).or_default().push((p, g));
    }
    let thresholds = cfg.f64_list("eval_thresholds")?;
    let report = ap_ar_report(&per_subject, &thresholds)?;
    report.write_csv(out, Some(&cfg.header("evaluate")))?;
    for (t, ap, ar) in &report.summary {
        println!("evaluate: t={t} AP={ap:.4} AR={ar:.4}");
    }
    Ok(())
}

fn sample(cfg: &Config, annotations: &[PathBuf], out: &Path) -> CliResult<()> {
    let seed = cfg.u64("seed")?;
    let clip_s = cfg.clip_length()?;
    let policy = match cfg.get("clip_policy") {
        "classification" => SamplePolicy::Classification {
            n_pos: cfg.usize("n_pos")?,
            n_neg: cfg.usize("n_neg")?,
            clip_s: clip_s.unwrap_or(2.5),
        },
        _ => SamplePolicy::Segmentation {
            n_mixed: cfg.usize("n_mixed")?,
            clip_s: clip_s.unwrap_or(60.0),
        },
    };
    let mut entries = Vec::new();
    for (i, p) in annotations.iter().enumerate() {
        let ann = parse_annotations(p)?;
        entries.extend(sample_clips(&ann, &policy, seed.wrapping_add(i as u64)).entries);
    }
    let manifest = ClipManifest { entries, seed };
    write_manifest(out, &manifest, Some(&cfg.header("sample-clips")))?;
    println!(
        "sample-clips: {} nns, {} non-nns, {} mixed -> {}",
        manifest.count(ClipClass::Nns),
        manifest.count(ClipClass::NonNns),
        manifest.count(ClipClass::Mixed),
        out.display()
    );
    Ok(())
}

fn kappa(cfg: &Config, a: &Path, b: &Path, out: Option<&Path>) -> CliResult<()> {
    let (sa, sb) = (parse_annotations(a)?, parse_annotations(b)?);
    if (sa.duration_s - sb.duration_s).abs() > 1e-6 {
        return Err(CliError::Invalid(format!(
            "annotations cover different durations: {} s and {} s",
            sa.duration_s, sb.duration_s
        )));
    }
    let window = cfg.f64("kappa_window_s")?;
    let k = cohen_kappa_incidence(&sa.nns_events(), &sb.nns_events(), sa.duration_s, window)?;
    println!("kappa: {k:.4} ({} vs {}, {window} s bins)", sa.coder, sb.coder);
    if let Some(p) = out {
        let mut s = comment_lines(&cfg.header("kappa"));
        s.push_str("subject,coder_a,coder_b,window_s,kappa\n");
        let _ = writeln!(s, "{},{},{},{window},{k:.6}", sa.subject, sa.coder, sb.coder);
        write_text(p, &s)?;
    }
    Ok(())
}
