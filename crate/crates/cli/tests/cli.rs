use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use miro::io::read_cloud;
use miro::model::{save_checkpoint, ModelConfig};
use miro::ModelParams;

fn miro() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_miro"));
    c.env_remove("MIRO_SEED");
    c
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run(args: &[&str]) -> String {
    ok(miro().args(args).output().unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{"spec": {
            "extent": [400, 400],
            "cluster_groups": [{"count": {"fixed": 3}, "molecules": {"fixed": 15},
                                "shape": {"kind": "gaussian", "sigma": 15}}],
            "background": {"count": 10}
        }}"#,
    )
    .unwrap();
    path
}

fn small_data(dir: &Path, count: usize) -> PathBuf {
    let cfg = small_scenario(dir);
    let data = dir.join("data");
    run(&["simulate", "--config", p(&cfg), "--count", &count.to_string(), "--seed", "3", "--out", p(&data)]);
    data
}

fn train_config(dir: &Path, epochs: usize, lr: f64) -> PathBuf {
    let path = dir.join(format!("train_{epochs}_{lr}.json"));
    fs::write(
        &path,
        format!(
            r#"{{"model": {{"latent_dim": 8, "steps": 2}},
                "train": {{"epochs": {epochs}, "batch_size": 2, "learning_rate": {lr}, "checkpoint_every": 2}}}}"#
        ),
    )
    .unwrap();
    path
}

fn csvs(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_scenario8_writes_twenty_cluster_clouds() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("s8");
    run(&["simulate", "--preset", "scenario8", "--count", "50", "--seed", "7", "--out", p(&out)]);
    let files = csvs(&out);
    assert_eq!(files.len(), 50);
    for f in &files {
        let c = read_cloud::<f64>(f).unwrap();
        assert_eq!(c.truth().unwrap().n_clusters(), 20);
    }
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn simulate_count_zero_writes_only_the_manifest() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("empty");
    run(&["simulate", "--preset", "ring", "--count", "0", "--out", p(&out)]);
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec!["manifest.json"]);
}

#[test]
fn simulate_is_byte_deterministic_and_honours_miro_seed() {
    let t = tempfile::tempdir().unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    let c = t.path().join("c");
    run(&["simulate", "--preset", "npc", "--count", "3", "--seed", "11", "--out", p(&a)]);
    run(&["simulate", "--preset", "npc", "--count", "3", "--seed", "11", "--out", p(&b)]);
    ok(miro()
        .env("MIRO_SEED", "11")
        .args(["simulate", "--preset", "npc", "--count", "3", "--out", p(&c)])
        .output()
        .unwrap());
    for name in ["cloud_00000.csv", "cloud_00001.csv", "cloud_00002.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        assert_eq!(x, fs::read(b.join(name)).unwrap());
        assert_eq!(x, fs::read(c.join(name)).unwrap());
    }
}

#[test]
fn unknown_preset_lists_the_known_ones() {
    let t = tempfile::tempdir().unwrap();
    let out = miro()
        .args(["simulate", "--preset", "scenario7", "--out", p(&t.path().join("x"))])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("scenario8") && err.contains("nanocluster"), "{err}");
    assert!(!t.path().join("x").exists());
}

#[test]
fn print_config_emits_parseable_defaults() {
    for cmd in [&["simulate", "--print-config"][..], &["train", "--print-config"], &["infer", "--print-config"]] {
        let text = run(cmd);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.is_object());
    }
    let text = run(&["train", "--print-config"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["model"]["latent_dim"], 256);
    assert_eq!(v["model"]["steps"], 8);
}

#[test]
fn train_with_zero_learning_rate_keeps_the_initialization() {
    let t = tempfile::tempdir().unwrap();
    let data = small_data(t.path(), 3);
    let out = t.path().join("run");
    run(&["train", "--data", p(&data), "--config", p(&train_config(t.path(), 2, 0.0)), "--seed", "5", "--out", p(&out)]);
    let (trained, _) = miro::model::load_checkpoint::<f64>(&out.join("model.json")).unwrap();
    let init = ModelParams::init(
        ModelConfig {
            latent_dim: 8,
            steps: 2,
            ..ModelConfig::default()
        },
        5,
    )
    .unwrap();
    assert!(trained.values().eq(init.values()));
}

#[test]
fn train_reduces_the_loss() {
    let t = tempfile::tempdir().unwrap();
    let data = small_data(t.path(), 4);
    let out = t.path().join("run");
    run(&["train", "--data", p(&data), "--config", p(&train_config(t.path(), 12, 3e-3)), "--out", p(&out)]);
    let csv = fs::read_to_string(out.join("loss.csv")).unwrap();
    let totals: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(totals.len(), 12);
    assert!(totals[11] < totals[0], "{totals:?}");
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let t = tempfile::tempdir().unwrap();
    let data = small_data(t.path(), 3);
    let full = t.path().join("full");
    let part = t.path().join("part");
    run(&["train", "--data", p(&data), "--config", p(&train_config(t.path(), 4, 1e-3)), "--out", p(&full)]);
    run(&["train", "--data", p(&data), "--config", p(&train_config(t.path(), 2, 1e-3)), "--out", p(&part)]);
    run(&["train", "--data", p(&data), "--resume", "--epochs", "4", "--out", p(&part)]);
    assert_eq!(fs::read(full.join("model.json")).unwrap(), fs::read(part.join("model.json")).unwrap());
    assert_eq!(fs::read(full.join("loss.csv")).unwrap(), fs::read(part.join("loss.csv")).unwrap());
}

#[test]
fn training_on_unlabeled_data_fails_without_leftovers() {
    let t = tempfile::tempdir().unwrap();
    let data = t.path().join("raw");
    fs::create_dir(&data).unwrap();
    fs::write(data.join("a.csv"), "x_nm,y_nm\n0,0\n10,0\n0,10\n10,10\n").unwrap();
    let out = t.path().join("run");
    let o = miro().args(["train", "--data", p(&data), "--out", p(&out)]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cluster_id"));
    assert!(!out.exists());
}

#[test]
fn zero_model_infers_like_plain_dbscan() {
    let t = tempfile::tempdir().unwrap();
    let data = small_data(t.path(), 1);
    let cloud = &csvs(&data)[0];
    let model = t.path().join("zero.json");
    let params = ModelParams::zeros(ModelConfig {
        latent_dim: 8,
        steps: 3,
        ..ModelConfig::default()
    })
    .unwrap();
    save_checkpoint(&model, &params, None).unwrap();
    let a = t.path().join("a");
    let b = t.path().join("b");
    run(&["infer", "--input", p(cloud), "--model", p(&model), "--eps", "30", "--min-pts", "4", "--out", p(&a), "--svg", "--collapsed", "--dump-graph"]);
    run(&["infer", "--input", p(cloud), "--no-miro", "--eps", "30", "--min-pts", "4", "--out", p(&b)]);
    assert_eq!(fs::read(a.join("labels.csv")).unwrap(), fs::read(b.join("labels.csv")).unwrap());
    for name in ["collapsed.csv", "scatter.svg", "graph.csv", "manifest.json"] {
        assert!(a.join(name).is_file(), "{name}");
    }
    let graph = fs::read_to_string(a.join("graph.csv")).unwrap();
    assert!(graph.starts_with("i,j,dist_nm,dir_x,dir_y"));
}

#[test]
fn evaluating_truth_against_itself_scores_one() {
    let t = tempfile::tempdir().unwrap();
    let data = small_data(t.path(), 2);
    let out = t.path().join("eval");
    run(&["evaluate", "--gt", p(&data), "--pred", p(&data), "--xi", "15", "--out", p(&out)]);
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = report.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        for metric in ["ji_c", "iou", "ari", "ari_dagger", "ami", "ari_c"] {
            let k = header.iter().position(|h| *h == metric).unwrap();
            assert_eq!(cells[k].parse::<f64>().unwrap(), 1.0, "{metric}");
        }
    }
    assert!(fs::read_to_string(out.join("summary.csv")).unwrap().contains("1.00"));
}

#[test]
fn bench_pairtest_reports_both_methods_per_distance() {
    let t = tempfile::tempdir().unwrap();
    let model = t.path().join("zero.json");
    let params = ModelParams::zeros(ModelConfig {
        latent_dim: 4,
        steps: 2,
        ..ModelConfig::default()
    })
    .unwrap();
    save_checkpoint(&model, &params, None).unwrap();
    let out = t.path().join("bench");
    run(&[
        "bench", "--preset", "pairtest", "--distances", "2,10", "--unit", "sigma", "--count", "10", "--tune-count", "4",
        "--mean-count", "40", "--model", p(&model), "--out", p(&out),
    ]);
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    // a zero model leaves the points in place, so both methods agree
    let ji = |r: &str| r.split(',').nth(5).unwrap().parse::<f64>().unwrap();
    assert_eq!(ji(rows[0]), ji(rows[1]));
    assert!(ji(rows[2]) > ji(rows[0]));
}
