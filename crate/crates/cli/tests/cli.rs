use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecg-arrhythmia"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn activation_error_reports_half() {
    let out = run(&["activation-error"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.03788"), "{text}");
    assert!(text.contains("x = -0.5000") || text.contains("x = 0.5000"), "{text}");
}

#[test]
fn selflearn_flags_missing_beat_at_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec");
    run(&[
        "synth",
        "--kind",
        "pulses",
        "--name",
        "gap",
        "--drop",
        "10",
        "--out",
        p(&rec),
    ]);
    let out = dir.path().join("sl");
    run(&["selflearn", "--record", p(&rec.join("gap")), "--out", p(&out)]);
    let log = std::fs::read_to_string(out.join("gap.anomalies.csv")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines[0], "record,sample_index,kind,t_rr,st_rr");
    // peaks every 345 samples from 345; slot 10 (sample 3795) is empty
    assert_eq!(lines[1..], ["gap,3847,missing_beat,397,345"]);
    assert!(out.join("selflearn.manifest.toml").exists());
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec");
    run(&[
        "synth",
        "--name",
        "a",
        "--beats",
        "200",
        "--seed",
        "5",
        "--out",
        p(&rec),
    ]);
    let feat = dir.path().join("feat");
    run(&[
        "features",
        "--record",
        p(&rec.join("a")),
        "--peaks-from-annotations",
        "--out",
        p(&feat),
    ]);
    let train = feat.join("train.features.csv");
    let (m1, m2) = (dir.path().join("m1"), dir.path().join("m2"));
    for m in [&m1, &m2] {
        run(&[
            "train",
            "--features",
            p(&train),
            "--seed",
            "7",
            "--max-epochs",
            "50",
            "--out",
            p(m),
        ]);
    }
    for f in ["model.txt", "model.real.txt", "mse.csv"] {
        assert_eq!(
            std::fs::read(m1.join(f)).unwrap(),
            std::fs::read(m2.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let model = std::fs::read_to_string(m1.join("model.txt")).unwrap();
    let manifest = std::fs::read_to_string(m1.join("train.manifest.toml")).unwrap();
    let digest = hex::encode(<sha2::Sha256 as sha2::Digest>::digest(model.as_bytes()));
    assert!(manifest.contains(&digest), "{manifest}");
    assert!(manifest.contains("seed = \"7\""));
    assert!(model.contains("numeric fixed 24 12"));

    let inf = dir.path().join("inf");
    run(&[
        "infer",
        "--model",
        p(&m1.join("model.txt")),
        "--features",
        p(&feat.join("test.features.csv")),
        "--out",
        p(&inf),
    ]);
    let metrics = std::fs::read_to_string(inf.join("metrics.txt")).unwrap();
    assert!(metrics.contains("accuracy = "));
}

#[test]
fn evaluate_needs_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[data]\nrecords = [\"missing/100\"]\n").unwrap();
    let out = bin()
        .args(["evaluate", "--config", p(&cfg), "--out", p(&dir.path().join("o"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn evaluate_lists_missing_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[data]\nrecords = [\"nowhere/100\"]\n[training]\nseed = 1\n").unwrap();
    let out = bin()
        .args(["evaluate", "--config", p(&cfg), "--out", p(&dir.path().join("o"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("100.hea"));
}

#[test]
fn bad_arguments_fail() {
    assert!(!bin().arg("--no-such-flag").status().unwrap().success());
    assert!(!bin()
        .args(["train", "--features", "x.csv", "--out", "o"])
        .status()
        .unwrap()
        .success());
    assert!(!bin()
        .args(["evaluate", "--config", "c.toml", "--classifier", "relu", "--out", "o"])
        .status()
        .unwrap()
        .success());
}
