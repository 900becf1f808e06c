use std::path::Path;
use std::process::{Command, Output};

use phyfps::fseq;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phyfps"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["frobnicate"])), 1);
    assert_eq!(code(&run(d, &["train", "--iterations", "lots"])), 1);
    // required input missing
    assert_eq!(code(&run(d, &["augment", "--f-low", "24"])), 1);
    assert_eq!(code(&run(d, &["augment", "--input", "x.fseq", "--strategy", "smear", "--f-low", "24"])), 1);
    std::fs::write(d.join("bad.json"), r#"{"train": {"iters": 3}}"#).unwrap();
    assert_eq!(code(&run(d, &["--config", "bad.json", "selftest"])), 1);
    assert_eq!(code(&run(d, &["--help"])), 0);
    assert_eq!(code(&run(d, &["retime", "--version"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = run(d, &["augment", "--input", "nope.fseq", "--strategy", "blur", "--f-low", "24", "--out", "o.fseq"]);
    assert_eq!(code(&missing), 2);
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    std::fs::write(d.join("junk.fseq"), b"not a sequence").unwrap();
    assert_eq!(code(&run(d, &["upsample", "--input", "junk.fseq", "--out", "u.fseq"])), 2);
    // 30 source frames cannot fill one output frame at N = 60
    ok(d, &["synth", "--duration", "0.5", "--fps", "60", "--out", "s.fseq"]);
    assert_eq!(code(&run(d, &["augment", "--input", "s.fseq", "--strategy", "blur", "--f-low", "1", "--out", "o.fseq"])), 2);
    // an impossible spec is a usage error
    assert_eq!(code(&run(d, &["augment", "--input", "s.fseq", "--strategy", "sharp", "--f-low", "120", "--out", "o.fseq"])), 1);
}

#[test]
fn augment_one_second_at_240_to_24() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--duration", "1", "--fps", "240", "--out", "src.fseq"]);
    for strategy in ["sharp", "blur", "rolling-shutter"] {
        let out = format!("{strategy}.fseq");
        ok(d, &["augment", "--input", "src.fseq", "--strategy", strategy, "--f-low", "24", "--out", &out]);
        let seq = fseq::load_sequence(&d.join(&out)).unwrap();
        assert_eq!(seq.len(), 24, "{strategy}");
        assert_eq!(seq.meta_fps(), 24.0);
        assert_eq!(seq.phy_fps_label(), Some(24.0));
    }
}

#[test]
fn predict_128_frames_gives_25_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let seq = ["--width", "32", "--height", "32", "--pattern", "grating", "--velocity", "40"];
    ok(d, &[&["synth", "--duration", "1", "--fps", "240", "--out", "a.fseq"][..], &seq[..]].concat());
    ok(d, &["build-dataset", "--inputs", "a.fseq", "--clip-len", "40", "--divisors", "1", "--out-dir", "ds"]);
    ok(d, &["train", "--manifest", "ds/manifest.json", "--iterations", "20", "--out", "m.json"]);
    assert!(d.join("m.loss.csv").exists());
    let duration = format!("{}", 128.0 / 30.0);
    ok(d, &[&["synth", "--duration", &duration, "--fps", "30", "--out", "v.fseq"][..], &seq[..]].concat());
    assert_eq!(fseq::load_sequence(&d.join("v.fseq")).unwrap().len(), 128);
    let csv = ok(d, &["predict", "--checkpoint", "m.json", "--inputs", "v.fseq"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "video_id,clip_index,f_hat");
    assert_eq!(lines.len(), 26);
    assert!(lines[25].contains(",24,"));
}

#[test]
fn audit_of_exact_predictions_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("video_id,clip_index,f_hat\n");
    for v in ["a", "b", "c"] {
        for c in 0..5 {
            csv.push_str(&format!("{v},{c},24\n"));
        }
    }
    std::fs::write(d.join("p.csv"), csv).unwrap();
    ok(d, &["audit", "--predictions", "p.csv", "--meta-fps", "24", "--out", "r.json", "--csv", "r.csv"]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["phy_fps"], 24.0);
    for k in ["avg_error", "pct_error", "intra_cv", "inter_cv"] {
        assert_eq!(r[k], 0.0, "{k}");
    }
    assert_eq!(r["clip_count"], 15);
    let table = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(table.starts_with("Model,Meta FPS,PhyFPS"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{"synth": {"duration": 0.5, "fps": 60, "out": "from_cfg.fseq"}}"#,
    )
    .unwrap();
    ok(d, &["--config", "cfg.json", "synth"]);
    assert_eq!(fseq::load_sequence(&d.join("from_cfg.fseq")).unwrap().len(), 30);
    ok(d, &["--config", "cfg.json", "synth", "--fps", "120", "--out", "flag.fseq"]);
    assert_eq!(fseq::load_sequence(&d.join("flag.fseq")).unwrap().len(), 60);
}

#[test]
fn retime_relabel_and_bt() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--duration", "1", "--fps", "30", "--out", "v.fseq"]);
    let mut csv = String::from("video_id,clip_index,f_hat\n");
    let id = fseq::load_sequence(&d.join("v.fseq")).unwrap().source_id().to_string();
    csv.push_str(&format!("{id},0,15\n"));
    std::fs::write(d.join("p.csv"), csv).unwrap();
    ok(d, &["retime", "--input", "v.fseq", "--predictions", "p.csv", "--relabel-only", "--out", "r.fseq"]);
    let r = fseq::load_sequence(&d.join("r.fseq")).unwrap();
    assert_eq!((r.len(), r.meta_fps()), (30, 15.0));
    assert!(d.join("r.plan.json").exists());
    ok(d, &["retime", "--input", "v.fseq", "--predictions", "p.csv", "--output-fps", "30", "--out", "g.fseq"]);
    // output instants 0..=58/30 cover source timestamps 0..=29/15
    assert_eq!(fseq::load_sequence(&d.join("g.fseq")).unwrap().len(), 59);
    assert_eq!(
        code(&run(d, &["retime", "--input", "v.fseq", "--predictions", "p.csv", "--mode", "dynamic", "--relabel-only", "--out", "x.fseq"])),
        1
    );

    std::fs::write(d.join("c.csv"), "variant_a,variant_b,winner\nA,B,a\nA,B,a\nA,B,a\nA,B,b\n").unwrap();
    let a = ok(d, &["bt", "--input", "c.csv", "--n-boot", "200", "--seed", "3", "--pseudo-count", "0"]);
    let b = ok(d, &["bt", "--input", "c.csv", "--n-boot", "200", "--seed", "3", "--pseudo-count", "0"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["n_comparisons"], 4);
}
