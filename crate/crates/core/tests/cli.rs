//! Command-line behavior: exit codes and output files.

use std::fs;
use std::path::Path;

use mcil::cli::{run_cli, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};

const SMALL: &str = r#"{
  "zoo": [
    { "name": "relu_8", "hidden_widths": [8], "activations": ["relu"] },
    { "name": "tanh_6_4", "hidden_widths": [6, 4], "activations": ["tanh", "tanh"] }
  ],
  "data": { "source": { "synthetic": { "num_classes": 3, "feature_dim": 3, "per_class": 60 } } },
  "stage1": { "epochs": 2 },
  "stage2": { "epochs": 1 },
  "cv_folds": 2
}"#;

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("mcil").chain(args.iter().copied()))
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(cli(&["run", "--config", &config, "--seed", "4", "--out", out.to_str().unwrap()]), EXIT_OK);
    for name in [
        "report.json",
        "manifest.json",
        "labels.csv",
        "confusion_relu_8_baseline.csv",
        "confusion_tanh_6_4_mcil.csv",
        "psychometric_relu_8_before.csv",
        "psychometric_tanh_6_4_after.csv",
        "features_relu_8_after.csv",
        "networks/relu_8.before.net",
        "networks/tanh_6_4.after.net",
    ] {
        assert!(out.join(name).is_file(), "missing {name}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["global_seed"], 4);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"global_seed\": 4"));
    let header = fs::read_to_string(out.join("psychometric_relu_8_before.csv")).unwrap();
    assert!(header.starts_with("delta_c,accuracy,count\n"));
}

#[test]
fn dry_run_trains_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(cli(&["run", "--config", &config, "--dry-run", "--out", out.to_str().unwrap()]), EXIT_OK);
    assert!(!out.exists());
}

#[test]
fn invalid_input_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad_loss = SMALL.replace(r#""stage2": { "epochs": 1 }"#, r#""stage2": { "loss": "precise" }"#);
    let config = write_config(dir.path(), &bad_loss);
    assert_eq!(cli(&["run", "--config", &config]), EXIT_VALIDATION);

    let config = write_config(dir.path(), "{ not json");
    assert_eq!(cli(&["run", "--config", &config]), EXIT_VALIDATION);

    let config = write_config(dir.path(), r#"{ "zoo": [], "unknown": 1 }"#);
    assert_eq!(cli(&["run", "--config", &config]), EXIT_VALIDATION);

    assert_eq!(cli(&["run"]), EXIT_VALIDATION);
    assert_eq!(cli(&["no-such-command"]), EXIT_VALIDATION);
    assert_eq!(cli(&["psychometric", "--sigmas", "1.0"]), EXIT_VALIDATION);
    assert_eq!(cli(&["psychometric", "--sigmas", "1.0,-2.0"]), EXIT_VALIDATION);

    let config = write_config(dir.path(), SMALL);
    assert_eq!(cli(&["ablation", "--config", &config, "--sizes", "2,3", "--dry-run"]), EXIT_VALIDATION);
}

#[test]
fn missing_files_are_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(cli(&["run", "--config", missing.to_str().unwrap()]), EXIT_RUNTIME);

    let csv_source = SMALL.replace(
        r#"{ "synthetic": { "num_classes": 3, "feature_dim": 3, "per_class": 60 } }"#,
        r#"{ "csv": { "path": "/nonexistent/data.csv", "num_classes": 3 } }"#,
    );
    let config = write_config(dir.path(), &csv_source);
    assert_eq!(cli(&["run", "--config", &config, "--out", dir.path().join("o").to_str().unwrap()]), EXIT_RUNTIME);
}

#[test]
fn gen_data_writes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let code = cli(&[
        "gen-data", "--classes", "3", "--dim", "4", "--per-class", "50", "--seed", "2", "--fractions", "0.3,0.6,0.1",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let count = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count() - 1;
    assert_eq!(count("dataset.csv"), 150);
    assert_eq!(count("d1.csv") + count("d2.csv") + count("d3.csv"), 150);
    assert_eq!(count("d1.csv"), 45);
    assert_eq!(count("d3.csv"), 15);
    let d2 = mcil::data::load_csv(out.join("d2.csv"), 3).unwrap();
    assert!(d2.samples().iter().all(|s| s.label.is_none()));
}

#[test]
fn ablation_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("abl");
    assert_eq!(cli(&["ablation", "--config", &config, "--sizes", "2", "--out", out.to_str().unwrap()]), EXIT_OK);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("ablation.json").is_file());
}

#[test]
fn psychometric_outputs_joint_curve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("psy");
    let code = cli(&[
        "psychometric", "--sigmas", "1,2", "--grid", "-1,0,1", "--trials", "2000", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    let curves = fs::read_to_string(out.join("curves.csv")).unwrap();
    let mut lines = curves.lines();
    let head = lines.next().unwrap();
    let var: f64 = head.split(',').next().unwrap().trim_start_matches("# sigma_joint_sq=").parse().unwrap();
    assert!((var - 0.8).abs() < 1e-12);
    assert_eq!(lines.next().unwrap(), "delta_c,observer_0,observer_1,joint");
    assert_eq!(lines.count(), 3);
    assert_eq!(fs::read_to_string(out.join("validation.csv")).unwrap().lines().count(), 4);
}
