use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 3

[dataset]
samples_per_group = 8
nx = 16
schedule = [
    { group_id = 1, mu = -1.0, sigma = 0.2 },
    { group_id = 2, mu = 0.5, sigma = 0.8 },
]

[model]
layers = 1
slices = 4
channels = 8
heads = 2

[strategy]
epochs = 2
initial_epochs = 3
test_per_group = 2
"#;

fn pncl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pncl"))
        .current_dir(dir)
        .env("PNCL_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = pncl(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn pipeline_leaves_its_artifacts() {
    let dir = setup();
    let p = dir.path();
    for cmd in ["gen-data", "solve-labels", "train", "eval"] {
        ok(p, &["--config", "exp.toml", "--out", "run", cmd]);
    }
    for f in [
        "dataset.pnds",
        "labeled.pnds",
        "model.pncl",
        "model.pncl.json",
        "eval.csv",
        "eval_scores.csv",
        "manifest_train.json",
    ] {
        assert!(p.join("run").join(f).exists(), "missing {f}");
    }
    let eval = std::fs::read_to_string(p.join("run/eval.csv")).unwrap();
    assert_eq!(eval.lines().count(), 1 + 2 * 2);

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("run/manifest_train.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 3);
    assert!(manifest["seeds"]["model"].is_u64());

    // Existing artifacts are protected unless asked otherwise.
    let again = pncl(p, &["--config", "exp.toml", "--out", "run", "train"]);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--overwrite"));
    assert!(p.join("run/failure_train.json").exists());
    ok(p, &["--config", "exp.toml", "--out", "run", "--overwrite", "train"]);
}

#[test]
fn missing_config_names_the_path() {
    let dir = setup();
    let out = pncl(dir.path(), &["--config", "does-not-exist.toml", "gen-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("does-not-exist.toml"));
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.toml"), "[model]\nwidth = 3\n").unwrap();
    let out = pncl(dir.path(), &["--config", "bad.toml", "gen-data"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
}

#[test]
fn reruns_give_identical_error_matrices() {
    let dir = setup();
    let p = dir.path();
    for out in ["a", "b"] {
        for cmd in ["gen-data", "solve-labels", "continual", "report"] {
            ok(p, &["--config", "exp.toml", "--out", out, "--workers", "1", cmd]);
        }
    }
    let a = std::fs::read(p.join("a/error_matrix_replay.csv")).unwrap();
    let b = std::fs::read(p.join("b/error_matrix_replay.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(std::fs::read(p.join("a/labeled.pnds")).unwrap(), std::fs::read(p.join("b/labeled.pnds")).unwrap());
}
