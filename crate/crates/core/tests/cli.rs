use std::path::Path;
use std::process::{Command, Output};

const TINY: [&str; 9] = [
    "synth.n_subjects=6",
    "synth.duration_s=20",
    "model.patch_size=50",
    "model.hidden_dim=8",
    "model.n_heads=2",
    "model.n_layers=1",
    "model.mlp_dim=16",
    "train.batch_size=8",
    "train.max_epochs=2",
];

fn ecgvit(workdir: &Path, args: &[&str], extra: &[&str]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ecgvit"));
    c.arg("--workdir").arg(workdir).args(args);
    for o in TINY.iter().chain(extra) {
        c.args(["--set", o]);
    }
    c.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn negative_learning_rate_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecgvit(dir.path(), &["train"], &["train.lr=-1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("lr"), "{}", stderr(&out));
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecgvit(dir.path(), &["config"], &["train.learning_rate=0.1"]);
    assert!(!out.status.success());
}

#[test]
fn config_prints_effective_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecgvit(dir.path(), &["--seed", "5", "config"], &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["model"]["hidden_dim"], 8);
}

#[test]
fn explain_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["synth", "preprocess"] {
        let out = ecgvit(dir.path(), &[cmd], &[]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }
    let out = ecgvit(dir.path(), &["explain"], &[]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("ecgvit train"), "{}", stderr(&out));
}

#[test]
fn evaluate_is_repeatable_and_task_checked() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["synth", "preprocess", "train", "evaluate"] {
        let out = ecgvit(dir.path(), &["--task", "gender", cmd], &[]);
        assert!(out.status.success(), "{cmd}: {}", stderr(&out));
    }
    let metrics = dir.path().join("reports/metrics.json");
    let first = std::fs::read(&metrics).unwrap();
    let out = ecgvit(dir.path(), &["--task", "gender", "evaluate"], &[]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&metrics).unwrap());

    let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["task"], "gender");
    assert!(v["metrics"]["accuracy"].as_f64().unwrap() <= 1.0);

    let out = ecgvit(dir.path(), &["--task", "id", "evaluate"], &[]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error: ") && err.contains("task"), "{err}");
}
