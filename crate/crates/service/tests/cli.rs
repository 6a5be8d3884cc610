mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::TITANIC;
use serde_json::json;

fn sensiloop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensiloop")).args(args).output().unwrap()
}

/// A small Titanic config so each run stays quick.
fn write_config(dir: &Path, family: &str) -> String {
    let cfg = json!({
        "seed": 3,
        "data": { "files": [{ "path": TITANIC }] },
        "features": {
            "inputs": ["Pclass", "Sex", "Age", "Fare"],
            "outputs": ["Survived"],
            "task": "classification",
            "normalization": "min_max"
        },
        "models": [{ "family": family, "hyperparameters": { "n_trees": 20 } }],
        "evaluation": { "split": "validation", "loss": "binary_cross_entropy" },
        "gsa": { "samples_per_curve": 129, "resamples": 2 },
        "explain": [{ "sample": 0, "method": "shap" }]
    });
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_is_reproducible_for_a_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "random_forest");
    let outs: Vec<_> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    for (out, seed) in outs.iter().zip(["5", "5", "6"]) {
        let o = sensiloop(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let sobol = |d: &Path| fs::read(d.join("sobol.csv")).unwrap();
    assert_eq!(sobol(&outs[0]), sobol(&outs[1]));
    assert_ne!(sobol(&outs[0]), sobol(&outs[2]));
    assert!(outs[0].join("models/m001.model").is_file());
}

#[test]
fn unknown_family_is_a_one_line_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "random_jungle");
    let o = sensiloop(&["run", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[config]: "), "{err}");
}

#[test]
fn missing_data_file_names_the_upload_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "random_forest");
    let text = fs::read_to_string(&cfg).unwrap().replace("titanic.csv", "absent.csv");
    fs::write(&cfg, text).unwrap();
    let o = sensiloop(&["run", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error[") && err.contains("absent.csv"), "{err}");
}

#[test]
fn saved_model_drives_gsa_explain_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "random_forest");
    let out = dir.path().join("out");
    let o = sensiloop(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = out.join("models/m001.model");
    let model = model.to_str().unwrap();

    let sobol = dir.path().join("sobol.csv");
    let o = sensiloop(&["gsa", "--model", model, "--data", TITANIC, "--out", sobol.to_str().unwrap(), "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&sobol).unwrap();
    for f in ["Pclass", "Sex", "Age", "Fare"] {
        assert!(csv.contains(f), "{csv}");
    }

    let o = sensiloop(&["explain", "--model", model, "--data", TITANIC, "--sample", "0", "--method", "lime", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let e: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(e["method"], "lime");

    let models_dir = out.join("models");
    let o = sensiloop(&["evaluate", "--models-dir", models_dir.to_str().unwrap(), "--data", TITANIC, "--loss", "binary_cross_entropy"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("m001"));
}

#[test]
fn explain_out_of_range_sample_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "random_forest");
    let out = dir.path().join("out");
    assert!(sensiloop(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let model = out.join("models/m001.model");
    let o = sensiloop(&["explain", "--model", model.to_str().unwrap(), "--data", TITANIC, "--sample", "5000", "--method", "shap"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error["), "{}", stderr(&o));
}
