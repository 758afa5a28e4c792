use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn s2t(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2t")).args(args).env("S2T_THREADS", "1").output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = s2t(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn first_json(stdout: &str) -> Value {
    serde_json::from_str(stdout.lines().next().unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &[
    "--preset",
    "desk",
    "--data.subjects",
    "5",
    "--data.sentences_per_subject",
    "3",
    "--model.l_e",
    "1",
    "--model.l_d",
    "1",
    "--train.max_epochs",
    "1",
    "--train.batch_size",
    "4",
];

/// Generates a small desk dataset and trains one epoch on it.
fn trained(dir: &Path) -> (String, String) {
    let data = dir.join("data");
    let run = dir.join("run");
    let out = ok(&[&["gen-data", "--out", p(&data)], SMALL].concat());
    assert_eq!(first_json(&out), serde_json::json!({"train": 9, "val": 3, "test": 3}));
    ok(&[&["train", "--data", p(&data), "--out", p(&run), "--deterministic"], SMALL].concat());
    (p(&data).to_string(), p(&run.join("model.s2t")).to_string())
}

#[test]
fn help_and_usage_errors() {
    assert!(ok(&["--help"]).contains("gen-data"));
    let out = s2t(&["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn unknown_config_key_is_rejected() {
    let out = s2t(&["gen-data", "--preset", "desk", "--train.lr", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("s2t: error[config]:") && err.contains("train.lr"), "{err}");
    assert_eq!(s2t(&["gen-data", "--preset", "v99"]).status.code(), Some(3));
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let out = s2t(&["eval", "--checkpoint", "/nonexistent/model.s2t", "--data", "/nonexistent"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn corrupt_checkpoint_has_its_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.s2t");
    std::fs::write(&bad, b"not a checkpoint").unwrap();
    let out = s2t(&["infer", "--checkpoint", p(&bad), "--input", p(&bad)]);
    assert_eq!(out.status.code(), Some(7));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ckpt) = trained(dir.path());
    let run = dir.path().join("run");
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("epoch,lr,train_xel,val_xel,val_la,val_cer,wall_seconds\n0,0.0008,"));

    let a = ok(&["eval", "--checkpoint", &ckpt, "--data", &data, "--split", "test"]);
    let b = ok(&["eval", "--checkpoint", &ckpt, "--data", &data, "--split", "test"]);
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(report["count"], 3);
    assert!(report["la"].as_f64().unwrap() >= 0.0);

    let lines = ok(&["infer", "--checkpoint", &ckpt, "--input", &format!("{data}/test.jsonl")]);
    assert_eq!(lines.lines().count(), 3);

    let abl = dir.path().join("abl");
    let spec = r#"{"mode":"drop_last_k","k":1}"#;
    ok(&["ablate", "--checkpoint", &ckpt, "--data", &data, "--ablation", spec, "--out", p(&abl)]);
    assert!(abl.join("ablated.jsonl").exists() && abl.join("report.json").exists());
    let bad = s2t(&["ablate", "--checkpoint", &ckpt, "--data", &data, "--ablation", r#"{"mode":"drop_all"}"#]);
    assert_eq!(bad.status.code(), Some(3));

    let att = dir.path().join("attn");
    let out = ok(&["attn", "--checkpoint", &ckpt, "--data", &data, "--index", "1", "--out", p(&att)]);
    let v = first_json(&out);
    assert!(att.join("attention.json").exists());
    assert!(att.join("layer0_head3.pgm").exists());
    assert_eq!(v["monotone_tracking"].as_array().unwrap().len(), 1);
}

#[test]
fn deterministic_training_is_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    trained(d1.path());
    trained(d2.path());
    let read = |d: &Path, f: &str| std::fs::read(d.join("run").join(f)).unwrap();
    assert_eq!(read(d1.path(), "metrics.csv"), read(d2.path(), "metrics.csv"));
    assert_eq!(read(d1.path(), "model.s2t"), read(d2.path(), "model.s2t"));
}

#[test]
fn v80_preset_reports_published_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "train",
        "--preset",
        "v80",
        "--data",
        "synthetic_en",
        "--data.subjects",
        "5",
        "--data.sentences_per_subject",
        "1",
        "--train.max_epochs",
        "0",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(first_json(&out), serde_json::json!({"theta_e": 523520, "theta_d": 1453520}));
    assert!(dir.path().join("model.s2t").exists());
    let vocab = std::fs::read_to_string(dir.path().join("vocab.txt")).unwrap();
    assert!(vocab.starts_with("s2t-vocab 1 bpe 2000"));
}

#[test]
fn train_bpe_writes_vocab() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "train-bpe",
        "--preset",
        "v80",
        "--vocab.size",
        "300",
        "--model.vocab_size",
        "300",
        "--data.corpus_sentences",
        "400",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(first_json(&out)["size"], 300);
    let wrong = s2t(&["train-bpe", "--preset", "desk", "--out", p(dir.path())]);
    assert_eq!(wrong.status.code(), Some(3));
}
