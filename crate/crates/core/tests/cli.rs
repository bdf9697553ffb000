use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dpflab::checkpoint::Checkpoint;
use serde_json::{json, Value};

const SMALL: &str = r#"{
    "train.strategy": "dpf",
    "train.epochs": 8,
    "data.samples": 300,
    "data.dim": 6,
    "data.classes": 3,
    "model.hidden": [16],
    "prune.final_sparsity": 0.8
}"#;

fn dpflab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpflab")).args(args).current_dir(dir).output().unwrap()
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn train_writes_the_full_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", &SMALL.replace("\"prune.final_sparsity\": 0.8", "\"prune.final_sparsity\": 0.8, \"output.checkpoint_every\": 2"));
    let out = dpflab(&["train", "--config", "c.json", "--out", "runs"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("runs/dpf_s0");
    for f in ["config.json", "metrics.csv", "metrics.json", "masks.bin", "dense.ckpt", "sparse.ckpt", "summary.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    assert!(run.join("checkpoints/epoch_0002.ckpt").is_file());

    let csv = fs::read_to_string(run.join("metrics.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    let json_rows = read_json(run.join("metrics.json")).as_array().unwrap().len();
    assert_eq!(rows, 8);
    assert_eq!(rows, json_rows);

    let summary = read_json(run.join("summary.json"));
    assert_eq!(summary["kind"], "train");
    let prunable = summary["params_prunable"].as_f64().unwrap();
    let achieved = summary["sparsity_achieved"].as_f64().unwrap();
    assert!((achieved - 0.8).abs() <= 1.0 / prunable);

    let sparse = Checkpoint::load(&run.join("sparse.ckpt")).unwrap();
    assert!(sparse.params.iter().enumerate().all(|(i, v)| sparse.mask.get(i) || *v == 0.0));

    // the written config is canonical: parsing and re-serializing it is a fixed point
    let canon = read_json(run.join("config.json"));
    let again = dpflab::config::ExperimentConfig::from_value(canon.clone()).unwrap().to_json();
    assert_eq!(canon, again);
}

#[test]
fn same_config_gives_byte_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", SMALL);
    for out in ["a", "b"] {
        assert!(dpflab(&["train", "--config", "c.json", "--out", out], tmp.path()).status.success());
    }
    for f in ["metrics.csv", "metrics.json", "masks.bin", "sparse.ckpt"] {
        let a = fs::read(tmp.path().join("a/dpf_s0").join(f)).unwrap();
        let b = fs::read(tmp.path().join("b/dpf_s0").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", SMALL);
    assert!(dpflab(&["train", "--config", "c.json", "--out", "r", "--seed", "7"], tmp.path()).status.success());
    let summary = read_json(tmp.path().join("r/dpf_s7/summary.json"));
    assert_eq!(summary["seed"], 7);
}

#[test]
fn malformed_configs_exit_one_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    for (i, text) in [
        r#"{"train.epoch": 3}"#,
        r#"{"train.epochs": "three"}"#,
        r#"{"train.strategy": "dpf""#,
        r#"{"prune.final_sparsity": 1.5}"#,
        r#"{"model.hidden": [0]}"#,
    ]
    .iter()
    .enumerate()
    {
        let name = format!("bad{i}.json");
        write(tmp.path(), &name, text);
        let out = dpflab(&["train", "--config", &name, "--out", "runs"], tmp.path());
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(!out.stderr.is_empty());
        assert!(!tmp.path().join("runs").exists(), "{text} left output behind");
    }
    let out = dpflab(&["train", "--config", "missing.json"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let out = dpflab(&["train", "--bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn diverging_run_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", &SMALL.replace("\"train.epochs\": 8", "\"train.epochs\": 8, \"train.lr\": 1e8, \"train.lr_schedule\": \"constant\""));
    let out = dpflab(&["train", "--config", "c.json", "--out", "runs"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

fn fake_summary(dir: &Path, name: &str, strategy: &str, acc: f64, curve: &[f64]) {
    let d = dir.join(name);
    fs::create_dir_all(&d).unwrap();
    let v = json!({
        "kind": "train",
        "strategy": strategy,
        "test_acc": acc,
        "train_acc": acc + 0.05,
        "sparsity_achieved": 0.9,
        "last_change_curve": curve,
    });
    fs::write(d.join("summary.json"), v.to_string()).unwrap();
}

#[test]
fn report_groups_strategies_with_sample_std() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");
    fake_summary(&runs, "a", "dpf", 0.90, &[0.5, 0.2, 0.0]);
    fake_summary(&runs, "b", "dpf", 0.92, &[0.3, 0.2, 0.0]);
    fake_summary(&runs, "c", "dpf", 0.94, &[0.4, 0.1, 0.0]);
    fake_summary(&runs, "d", "one_shot_ft", 0.80, &[]);
    let out = dpflab(&["report", "runs"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_json(runs.join("report.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let dpf = rows.iter().find(|r| r["strategy"] == "dpf").unwrap();
    assert_eq!(dpf["runs"], 3);
    assert!((dpf["test_acc_mean"].as_f64().unwrap() - 0.92).abs() < 1e-12);
    assert!((dpf["test_acc_std"].as_f64().unwrap() - 0.02).abs() < 1e-12);
    let curve: Vec<f64> = dpf["last_change_curve"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((curve[0] - 0.4).abs() < 1e-12 && (curve[1] - 0.5 / 3.0).abs() < 1e-12 && curve[2] == 0.0);
    let single = rows.iter().find(|r| r["strategy"] == "one_shot_ft").unwrap();
    assert_eq!(single["test_acc_std"], 0.0);
    let csv = fs::read_to_string(runs.join("report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("dpf,3,0.920000,0.020000")));
    assert!(runs.join("last_change.csv").is_file());
}

#[test]
fn report_on_empty_directory_fails() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(dpflab(&["report", "empty"], tmp.path()).status.code(), Some(1));
}

#[test]
fn convexlab_reports_slopes_and_paired_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "thm1.json", r#"{"lab.theorem": "thm1", "lab.dim": 10, "lab.L": 4, "lab.horizons": [100, 1000, 10000], "lab.seeds": 3}"#);
    write(tmp.path(), "one.json", r#"{"lab.theorem": "thm1", "lab.dim": 10, "lab.horizons": [500], "lab.seeds": 2}"#);
    write(tmp.path(), "pair.json", r#"{"lab.theorem": "one_shot", "lab.dim": 10, "lab.L": 10, "lab.horizons": [1000], "lab.seeds": 4}"#);
    for cfg in ["thm1.json", "pair.json"] {
        let out = dpflab(&["convexlab", "--config", cfg, "--out", "lab"], tmp.path());
        assert!(out.status.success(), "{cfg}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let s = read_json(tmp.path().join("lab/lab_thm1_s0/summary.json"));
    assert!(s["slope"].as_f64().unwrap().is_finite());
    assert_eq!(s["medians"].as_array().unwrap().len(), 3);
    let runs = read_json(tmp.path().join("lab/lab_thm1_s0/runs.json"));
    assert_eq!(runs.as_array().unwrap().len(), 9);
    for key in ["T", "seed", "sparsity", "result", "pruning_term"] {
        assert!(!runs[0][key].is_null(), "missing {key}");
    }

    // same run id as the first thm1 config, so it gets its own root
    let out = dpflab(&["convexlab", "--config", "one.json", "--out", "single"], tmp.path());
    assert!(out.status.success());
    assert!(read_json(tmp.path().join("single/lab_thm1_s0/summary.json"))["slope"].is_null());

    let p = read_json(tmp.path().join("lab/lab_one_shot_s0/summary.json"));
    assert_eq!(p["dpf_seeds"], p["one_shot_seeds"]);
    assert_eq!(p["dpf_seeds"].as_array().unwrap().len(), 4);
}

#[test]
fn grid_runs_every_config_with_distinct_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = json!([
        {"train.strategy": "dpf", "train.epochs": 2, "data.samples": 200, "model.hidden": [8]},
        {"train.strategy": "one_shot", "train.epochs": 2, "data.samples": 200, "model.hidden": [8]},
        {"train.strategy": "dense", "train.epochs": 2, "data.samples": 200, "model.hidden": [8], "train.seed": 3},
    ]);
    write(tmp.path(), "grid.json", &grid.to_string());
    let out = Command::new(env!("CARGO_BIN_EXE_dpflab"))
        .args(["train", "--grid", "grid.json", "--out", "g"])
        .env("DPFLAB_THREADS", "2")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for id in ["dpf_s0", "one_shot_ft_s0", "dense_s3"] {
        assert!(tmp.path().join("g").join(id).join("summary.json").is_file(), "{id}");
    }

    let dup = json!([{"train.epochs": 1}, {"train.epochs": 2}]);
    write(tmp.path(), "dup.json", &dup.to_string());
    assert_eq!(dpflab(&["train", "--grid", "dup.json", "--out", "d"], tmp.path()).status.code(), Some(1));

    let out = Command::new(env!("CARGO_BIN_EXE_dpflab"))
        .args(["train", "--grid", "grid.json", "--out", "z"])
        .env("DPFLAB_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ticket_and_finetune_build_on_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", SMALL);
    assert!(dpflab(&["train", "--config", "c.json", "--out", "runs"], tmp.path()).status.success());

    let out = dpflab(&["retrain-ticket", "--config", "c.json", "--out", "runs", "--mask", "runs/dpf_s0/sparse.ckpt"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ticket = tmp.path().join("runs/dpf_s0_ticket");
    let cmp = read_json(ticket.join("comparison.json"));
    let origin = read_json(tmp.path().join("runs/dpf_s0/summary.json"));
    assert_eq!(cmp["origin_test_acc"], origin["test_acc"]);
    let mask = Checkpoint::load(&tmp.path().join("runs/dpf_s0/sparse.ckpt")).unwrap().mask;
    let retrained = Checkpoint::load(&ticket.join("sparse.ckpt")).unwrap();
    assert_eq!(retrained.mask, mask);
    assert_eq!(read_json(ticket.join("summary.json"))["strategy"], "lottery_ticket");

    write(tmp.path(), "ft.json", &SMALL.replace("\"train.epochs\": 8", "\"train.epochs\": 8, \"train.finetune_epochs\": 2"));
    let out = dpflab(&["finetune", "--config", "ft.json", "--out", "runs", "--from", "runs/dpf_s0/dense.ckpt"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tuned = Checkpoint::load(&tmp.path().join("runs/dpf_s0_finetune/sparse.ckpt")).unwrap();
    assert_eq!(tuned.mask, mask);
    assert!(tuned.params.iter().enumerate().all(|(i, v)| mask.get(i) || *v == 0.0));

    // finetuning needs a positive number of epochs
    let out = dpflab(&["finetune", "--config", "c.json", "--out", "runs", "--from", "runs/dpf_s0/dense.ckpt"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn resume_flag_continues_to_the_same_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.json", &SMALL.replace("\"train.epochs\": 8", "\"train.epochs\": 8, \"output.checkpoint_every\": 2"));
    assert!(dpflab(&["train", "--config", "c.json", "--out", "a"], tmp.path()).status.success());
    let out = dpflab(&["train", "--config", "c.json", "--out", "b", "--resume", "a/dpf_s0/checkpoints/epoch_0002.ckpt"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = fs::read(tmp.path().join("a/dpf_s0/sparse.ckpt")).unwrap();
    let b = fs::read(tmp.path().join("b/dpf_s0/sparse.ckpt")).unwrap();
    assert_eq!(a, b);
}
