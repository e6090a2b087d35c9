use std::path::Path;
use std::process::{Command, Output};

use altbot::scoring::{read_labeled_csv, write_labeled_csv, LabeledArticle};
use serde_json::Value;

fn altbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_altbot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = altbot(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn synth(dir: &Path, n: usize, seed: u64) -> std::path::PathBuf {
    let data = dir.join("data");
    ok(&["synth", "--n", &n.to_string(), "--seed", &seed.to_string(), "--out", p(&data)]);
    data
}

#[test]
fn exit_codes_separate_config_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 500, 3);
    let out = dir.path().join("r");

    let bad_fraction = altbot(&["report", "--in", p(&data), "--out", p(&out), "--train-fraction", "1.5"]);
    assert_eq!(bad_fraction.status.code(), Some(2));

    let unknown_flag = altbot(&["report", "--bogus"]);
    assert_eq!(unknown_flag.status.code(), Some(2));

    let missing = altbot(&["label", "--articles", "/nonexistent/a.jsonl", "--scores", "/nonexistent/s.csv", "--out", p(&out)]);
    assert_eq!(missing.status.code(), Some(3));

    let bad_model = altbot(&["report", "--in", p(&data), "--out", p(&out), "--models", "lr,tree"]);
    assert_eq!(bad_model.status.code(), Some(2));
}

#[test]
fn report_writes_contract_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 3000, 11);
    let out = dir.path().join("report");
    ok(&["report", "--in", p(&data), "--out", p(&out), "--seed", "11"]);

    for f in [
        "report.json",
        "ztest.json",
        "groups.csv",
        "groups_location.csv",
        "groups_health.csv",
        "labeled.csv",
        "roc_lr.csv",
        "roc_knn.csv",
        "roc_svm.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report = read_json(&out.join("report.json"));
    for kind in ["lr", "knn", "svm"] {
        let f1 = report["models"][kind]["report"]["true"]["f1"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
        let auc = report["models"][kind]["auc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }
    assert_eq!(report["seed"], 11);
    assert!(report["feature_importance"].as_object().unwrap().len() == 6);

    let roc = std::fs::read_to_string(out.join("roc_lr.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n"));
    let labeled = read_labeled_csv(&out.join("labeled.csv")).unwrap();
    assert_eq!(labeled.len() as u64, report["dataset"]["labeled"].as_u64().unwrap());
}

#[test]
fn threshold_above_maximum_labels_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 800, 5);
    let out = dir.path().join("labeled.csv");
    let args = |t: &str| {
        vec![
            "label".to_string(),
            "--articles".into(),
            p(&data.join("articles.jsonl")).into(),
            "--scores".into(),
            p(&data.join("scores.csv")).into(),
            "--threshold".into(),
            t.into(),
            "--out".into(),
            p(&out).into(),
        ]
    };
    let run = |t: &str| {
        let a = args(t);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
        read_labeled_csv(&out).unwrap()
    };
    let high = run("40");
    assert!(!high.is_empty());
    assert!(high.iter().all(|a| !a.is_spammed));
    let default = run("20");
    assert!(default.iter().any(|a| a.is_spammed));
}

#[test]
fn ztest_from_labeled_file_matches_reference_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labeled.csv");
    let mut rows = Vec::with_capacity(1_398_007);
    for (discipline, spammed, n) in [
        ("Medicine", true, 174_876),
        ("Medicine", false, 1_178_085 - 174_876),
        ("Energy", true, 26_803),
        ("Energy", false, 219_922 - 26_803),
    ] {
        for _ in 0..n {
            rows.push(LabeledArticle {
                altmetric_id: String::new(),
                overall_score: if spammed { 25.0 } else { 5.0 },
                discipline: discipline.into(),
                journal: "j".into(),
                research_type: "t".into(),
                publisher: "p".into(),
                altmetric_score: 1.0,
                author_location: "unknown".into(),
                is_spammed: spammed,
            });
        }
    }
    write_labeled_csv(&path, &rows).unwrap();
    drop(rows);
    let out = dir.path().join("z.json");
    ok(&["ztest", "--labeled", p(&path), "--out", p(&out)]);
    let z = read_json(&out);
    assert!((z["z"].as_f64().unwrap() - 32.5).abs() <= 0.1, "{z}");
    assert!(z["p_two_tailed"].as_f64().unwrap() < 0.001);
    assert_eq!(z["underflow"], true);

    let counts = dir.path().join("c.json");
    ok(&["ztest", "--counts", "174876", "1178085", "26803", "219922", "--out", p(&counts)]);
    assert_eq!(read_json(&counts)["z"], z["z"]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1500, 9);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "train_fraction = 0.5\nmodels = [\"lr\"]\nseed = 4\n").unwrap();

    let from_file = dir.path().join("a");
    ok(&["report", "--config", p(&cfg), "--in", p(&data), "--out", p(&from_file)]);
    let r = read_json(&from_file.join("report.json"));
    assert_eq!(r["config"]["train_fraction"], 0.5);
    assert_eq!(r["seed"], 4);
    assert_eq!(r["models"].as_object().unwrap().len(), 1);

    let flagged = dir.path().join("b");
    ok(&[
        "report", "--config", p(&cfg), "--in", p(&data), "--out", p(&flagged), "--train-fraction", "0.7", "--seed", "8",
    ]);
    let r = read_json(&flagged.join("report.json"));
    assert_eq!(r["config"]["train_fraction"], 0.7);
    assert_eq!(r["seed"], 8);
    assert_eq!(r["models"].as_object().unwrap().len(), 1);
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "train_fraktion = 0.5\n").unwrap();
    let out = altbot(&["report", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_fraktion"));
}

#[test]
fn resampling_before_split_grows_the_test_set() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 2000, 13);
    let base = dir.path().join("base");
    let leaky = dir.path().join("leaky");
    ok(&["report", "--in", p(&data), "--out", p(&base), "--models", "lr"]);
    ok(&["report", "--in", p(&data), "--out", p(&leaky), "--models", "lr", "--resample-before-split"]);
    let rows = |d: &Path| read_json(&d.join("report.json"))["split"]["test_rows"].as_u64().unwrap();
    assert!(rows(&leaky) >= rows(&base));
    assert_eq!(read_json(&leaky.join("report.json"))["config"]["resample_before_split"], true);
}

#[test]
fn train_then_eval_round_trips_through_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 1500, 21);
    let labeled = dir.path().join("labeled.csv");
    ok(&[
        "label",
        "--articles",
        p(&data.join("articles.jsonl")),
        "--scores",
        p(&data.join("scores.csv")),
        "--out",
        p(&labeled),
    ]);
    for kind in ["lr", "knn", "svm"] {
        let model = dir.path().join(format!("{kind}.json"));
        ok(&["train", "--labeled", p(&labeled), "--model", kind, "--out", p(&model)]);
        let out = dir.path().join("eval");
        ok(&["eval", "--model", p(&model), "--labeled", p(&labeled), "--out", p(&out)]);
        let e = read_json(&out.join(format!("eval_{kind}.json")));
        assert_eq!(e["model"], kind);
        assert!(out.join(format!("roc_{kind}.csv")).is_file());
    }
}

#[test]
fn harvest_collects_every_tweeter_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 30, 2);
    let ck = dir.path().join("ck.jsonl");
    let out = dir.path().join("harvested.csv");
    let (articles, source) = (data.join("articles.jsonl"), data.join("scores.csv"));
    let args = [
        "harvest",
        "--articles",
        p(&articles),
        "--source",
        p(&source),
        "--checkpoint",
        p(&ck),
        "--rate-limit",
        "1000",
        "--out",
        p(&out),
    ];
    ok(&args);
    let first = std::fs::read_to_string(&out).unwrap();
    let second = String::from_utf8(ok(&args).stdout).unwrap();
    assert!(second.contains("(0 this run)"), "{second}");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);
    assert!(first.lines().count() > 1);
}
