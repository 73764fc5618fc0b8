use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nns(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nns"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_scores(dir: &Path) {
    let mut s = String::from("source,start_s,end_s,score\n");
    for i in 0..=15 {
        let t = i as f64 * 0.5;
        let score = if (2.0..5.0).contains(&t) { 0.95 } else { 0.1 };
        s.push_str(&format!("clip,{t:.3},{:.3},{score}\n", t + 2.5));
    }
    fs::write(dir.join("scores.csv"), s).unwrap();
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&nns(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&nns(dir.path(), &["segment"])), 1);
    assert_eq!(
        code(&nns(dir.path(), &["synth", "--out", "x", "--window-s", "soon"])),
        1
    );
    assert_eq!(code(&nns(dir.path(), &["--help"])), 0);
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = nns(
        dir.path(),
        &["evaluate", "--pred", "none.csv", "--gt", "none.csv", "--out", "r.csv"],
    );
    assert_eq!(code(&o), 2);
    let o = nns(dir.path(), &["synth", "--out", "v", "--config", "absent.txt"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_is_validated_and_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_scores(dir.path());
    fs::write(dir.path().join("bad.txt"), "treshold=0.9\n").unwrap();
    let o = nns(
        dir.path(),
        &[
            "segment",
            "--config",
            "bad.txt",
            "--backend",
            "scorefile:scores.csv",
            "--out",
            "e.csv",
        ],
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("treshold"));

    fs::write(
        dir.path().join("c.txt"),
        "threshold=0.2\nmode=tiled\nbackend=scorefile:scores.csv\n",
    )
    .unwrap();
    let o = nns(
        dir.path(),
        &["segment", "--config", "c.txt", "--threshold", "0.9", "--out", "e.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    assert!(text.contains("# threshold=0.9\n"));
    assert!(text.contains("# mode=tiled\n"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "source,start_s,end_s,label,confidence");
    assert_eq!(rows.len(), 2, "{text}");
    assert!(rows[1].starts_with("clip,2.500,5.000,nns,"), "{}", rows[1]);
}

#[test]
fn score_replay_writes_svg_with_truth_lane() {
    let dir = tempfile::tempdir().unwrap();
    write_scores(dir.path());
    fs::write(
        dir.path().join("gt.csv"),
        "source,start_s,end_s,label,confidence\nclip,2.0,7.0,nns,1\n",
    )
    .unwrap();
    let o = nns(
        dir.path(),
        &[
            "segment",
            "--backend",
            "scorefile:scores.csv",
            "--out",
            "e.csv",
            "--svg",
            "t.svg",
            "--gt",
            "gt.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(dir.path().join("t.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));

    let o = nns(
        dir.path(),
        &["evaluate", "--pred", "e.csv", "--gt", "gt.csv", "--out", "r.csv"],
    );
    assert_eq!(code(&o), 0);
    let report = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    for t in ["0.1", "0.3", "0.5"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("ALL,{t},"))), "{report}");
    }
}

#[test]
fn help_documents_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let o = nns(dir.path(), &["segment", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--threshold",
        "--mode",
        "--window-s",
        "--backend",
        "--jobs",
        "--config",
        "--svg",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}
