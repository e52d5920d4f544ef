use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn flowsurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowsurv")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn sha256(path: &Path) -> Vec<u8> {
    Sha256::digest(fs::read(path).unwrap()).to_vec()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_MODEL: &str = "[model]\nd = 8\nd_r = 4\nepochs = 3\nbatch_size = 8\npatience = 2\n";

#[test]
fn generate_writes_header_plus_one_line_per_patient() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "seed = 1\n[generator]\nn_patients = 10\nfolds = 2\n");
    ok(&flowsurv(&["generate", "--config", s(&cfg)]));
    let text = fs::read_to_string(dir.path().join("dataset.survjsonl")).unwrap();
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "seed = 5\n[generator]\nn_patients = 40\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&flowsurv(&["generate", "--config", s(&cfg), "--out", s(&a)]));
    ok(&flowsurv(&["generate", "--config", s(&cfg), "--out", s(&b)]));
    assert_eq!(sha256(&a.join("dataset.survjsonl")), sha256(&b.join("dataset.survjsonl")));

    let c = dir.path().join("c");
    ok(&flowsurv(&["generate", "--config", s(&cfg), "--out", s(&c), "--seed", "6"]));
    assert_ne!(sha256(&a.join("dataset.survjsonl")), sha256(&c.join("dataset.survjsonl")));
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.toml", "[generator]\nn_patients = 10\n");
    let out = flowsurv(&["generate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let typo = write_config(dir.path(), "typo.toml", "seed = 1\n[model]\nlearnin_rate = 0.1\n");
    let out = flowsurv(&["generate", "--config", s(&typo)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("learnin_rate"));

    let cfg = write_config(dir.path(), "run.toml", "seed = 1\n");
    let out = flowsurv(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "missing dataset");
    assert!(stderr(&out).contains("dataset"));

    assert_eq!(flowsurv(&["generate"]).status.code(), Some(2));
}

#[test]
fn example_config_is_valid() {
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(example).unwrap().replace("n_patients = 2000", "n_patients = 20");
    let cfg = write_config(dir.path(), "example.toml", &text);
    let out = ok(&flowsurv(&["generate", "--config", s(&cfg)]));
    assert!(out.contains("wrote 20 records"), "{out}");
}

#[test]
fn train_then_evaluate_end_to_end() {
    let dir = TempDir::new().unwrap();
    let text = format!("seed = 4\n[generator]\nn_patients = 64\nfolds = 2\n{SMALL_MODEL}");
    let paths = "[paths]\ndataset = \"dataset.survjsonl\"\n";
    let cfg = write_config(dir.path(), "run.toml", &format!("{text}{paths}"));
    ok(&flowsurv(&["generate", "--config", s(&cfg)]));

    let start = Instant::now();
    ok(&flowsurv(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("r1"))]));
    assert!(start.elapsed() < Duration::from_secs(120));
    ok(&flowsurv(&["train", "--config", s(&cfg), "--out", s(&dir.path().join("r2"))]));

    let summary = read_json(&dir.path().join("r1/summary.json"));
    let folds = summary["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 2);
    for (k, fold) in folds.iter().enumerate() {
        assert_eq!(fold["fold"], k);
        assert!(dir.path().join("r1").join(fold["checkpoint"].as_str().unwrap()).is_file());
    }
    assert!(summary["c_index"].as_str().unwrap().contains(" ± "));
    assert_eq!(sha256(&dir.path().join("r1/summary.json")), sha256(&dir.path().join("r2/summary.json")));

    let ckpt = dir.path().join("r1/fold0.checkpoint.json");
    let data = dir.path().join("dataset.survjsonl");
    let eval = dir.path().join("eval");
    ok(&flowsurv(&["evaluate", "--checkpoint", s(&ckpt), "--dataset", s(&data), "--out", s(&eval)]));
    let report = read_json(&eval.join("complete_report.json"));
    assert_eq!(report["scenario"], "complete");
    assert_eq!(report["per_patient_risk"].as_array().unwrap().len(), 64);

    let lr = read_json(&eval.join("complete_logrank.json"));
    let p = lr["p"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0, "{p}");
    assert!(lr["chi2"].as_f64().unwrap() >= 0.0);
    for side in ["high", "low"] {
        let km = fs::read_to_string(eval.join(format!("complete_km_{side}.csv"))).unwrap();
        assert_eq!(km.lines().next(), Some("time,survival"));
    }

    // Fold filter and config-supplied checkpoint.
    let eval_cfg = format!("{text}{paths}checkpoint = \"r1/fold1.checkpoint.json\"\nout_dir = \"eval1\"\n");
    let eval_cfg = write_config(dir.path(), "eval.toml", &eval_cfg);
    ok(&flowsurv(&["evaluate", "--config", s(&eval_cfg), "--fold", "1", "--scenario", "missing_wsi"]));
    let report = read_json(&dir.path().join("eval1/missing_wsi_report.json"));
    assert_eq!(report["fold"], 1);
    assert_eq!(report["per_patient_risk"].as_array().unwrap().len(), 32);

    let out = ok(&flowsurv(&["impute-report", "--config", s(&eval_cfg)]));
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["scenarios"].as_array().unwrap().len(), 2);
    assert_eq!(report["recovery"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("eval1/impute_report.json").is_file());
}

#[test]
fn gene_free_dataset_evaluates_under_missing_gene() {
    let dir = TempDir::new().unwrap();
    let train = format!("seed = 2\n[generator]\nn_patients = 40\nfolds = 2\n{SMALL_MODEL}");
    let train = write_config(dir.path(), "train.toml", &train);
    ok(&flowsurv(&["generate", "--config", s(&train)]));
    ok(&flowsurv(&["train", "--config", s(&train)]));

    let hidden = "seed = 2\n[generator]\nn_patients = 40\nfolds = 2\n[paths]\nout_dir = \"nogene\"\n\
                  [mask]\nmodality = \"gene\"\nrate = 1.0\ndrop_payload = true\n";
    let hidden = write_config(dir.path(), "nogene.toml", hidden);
    ok(&flowsurv(&["generate", "--config", s(&hidden)]));
    let data = dir.path().join("nogene/dataset.survjsonl");
    assert!(!fs::read_to_string(&data).unwrap().contains("\"gene_vec\""));

    let ckpt = dir.path().join("fold0.checkpoint.json");
    let out_dir = dir.path().join("nogene");
    let args = ["--checkpoint", s(&ckpt), "--dataset", s(&data), "--out", s(&out_dir)];
    let mut eval = vec!["evaluate", "--scenario", "missing_gene"];
    eval.extend(args);
    ok(&flowsurv(&eval));
    let report = read_json(&dir.path().join("nogene/missing_gene_report.json"));
    assert_eq!(report["scenario"], "missing_gene");

    let mut wsi = vec!["evaluate", "--scenario", "missing_wsi"];
    wsi.extend(args);
    assert_eq!(flowsurv(&wsi).status.code(), Some(4), "nothing left to evaluate");

    // A gene-free dataset cannot be trained on.
    let out = flowsurv(&["train", "--config", s(&hidden)]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn dimension_mismatch_exits_4_naming_both_sizes() {
    let dir = TempDir::new().unwrap();
    let train = format!("seed = 3\n[generator]\nn_patients = 30\nfolds = 2\n{SMALL_MODEL}");
    let train = write_config(dir.path(), "train.toml", &train);
    ok(&flowsurv(&["generate", "--config", s(&train)]));
    ok(&flowsurv(&["train", "--config", s(&train)]));

    let other = "seed = 3\n[generator]\nn_patients = 10\nd_g = 12\nfolds = 2\n[paths]\nout_dir = \"other\"\n";
    let other = write_config(dir.path(), "other.toml", other);
    ok(&flowsurv(&["generate", "--config", s(&other)]));
    let out = flowsurv(&[
        "evaluate",
        "--checkpoint",
        s(&dir.path().join("fold0.checkpoint.json")),
        "--dataset",
        s(&dir.path().join("other/dataset.survjsonl")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let err = stderr(&out);
    assert!(err.contains("16") && err.contains("12"), "{err}");
}

#[test]
fn diverging_training_exits_3() {
    let dir = TempDir::new().unwrap();
    let text = format!("seed = 3\n[generator]\nn_patients = 30\nfolds = 2\n{SMALL_MODEL}learning_rate = 1e150\n");
    let cfg = write_config(dir.path(), "run.toml", &text);
    ok(&flowsurv(&["generate", "--config", s(&cfg)]));
    let out = flowsurv(&["train", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("epoch"), "{}", stderr(&out));
}

fn flop_rows(csv: &str) -> Vec<(String, u64)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("variant,flops"));
    lines
        .map(|l| {
            let (v, f) = l.split_once(',').unwrap();
            (v.to_string(), f.parse().unwrap())
        })
        .collect()
}

#[test]
fn flops_table() {
    let dir = TempDir::new().unwrap();
    let csv = ok(&flowsurv(&["flops", "--t", "256", "--d", "64", "--d-r", "16", "--out", s(dir.path())]));
    let rows = flop_rows(&csv);
    assert_eq!(rows.iter().map(|r| r.0.as_str()).collect::<Vec<_>>(), ["dense", "low_rank"]);
    assert!(rows[1].1 as f64 / rows[0].1 as f64 <= 0.40);
    assert_eq!(fs::read_to_string(dir.path().join("flops.csv")).unwrap(), csv);

    let rows = flop_rows(&ok(&flowsurv(&["flops", "--t", "64", "--d", "16", "--d-r", "16"])));
    assert!(rows[1].1 >= rows[0].1);

    assert_eq!(flowsurv(&["flops", "--t", "0", "--d", "16", "--d-r", "4"]).status.code(), Some(2));
}
