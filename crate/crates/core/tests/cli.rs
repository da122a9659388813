mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;

fn cup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cup"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .env_remove("CUP_ALPHA")
        .output()
        .unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingest_fixture(dir: &Path) {
    ok(cup(
        dir,
        &[
            "--input",
            path(&fixture("rams.jsonl")),
            "--coref",
            path(&fixture("rams_coref.jsonl")),
            "--penman-dir",
            path(&fixture("amr")),
            "ingest",
        ],
    ));
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn lines(p: &Path) -> Vec<Value> {
    fs::read_to_string(p).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn full_pipeline_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let templates = fixture("templates.jsonl");
    ingest_fixture(d);
    ok(cup(d, &["graph"]));
    ok(cup(d, &["--templates", path(&templates), "stage"]));
    ok(cup(d, &["--templates", path(&templates), "decode", "--generator", "oracle"]));
    let report = ok(cup(d, &["eval"]));
    assert!(report.lines().nth(1).unwrap().starts_with("all"));
    let score = read_json(&d.join("score.json"));
    assert_eq!(score["f1"], 1.0);
    assert_eq!(score["gold"], 14);

    // predictions carry exactly the gold strings
    let mut gold: Vec<(String, u64, String, String)> = lines(&d.join("gold.jsonl"))
        .iter()
        .map(|g| {
            (
                g["doc_id"].as_str().unwrap().into(),
                g["event_index"].as_u64().unwrap(),
                g["role"].as_str().unwrap().into(),
                g["text"].as_str().unwrap().into(),
            )
        })
        .collect();
    let mut predicted: Vec<(String, u64, String, String)> = lines(&d.join("predictions.jsonl"))
        .iter()
        .flat_map(|p| {
            p["predictions"].as_array().unwrap().iter().map(move |t| {
                (
                    p["doc_id"].as_str().unwrap().to_string(),
                    p["event_index"].as_u64().unwrap(),
                    p["role"].as_str().unwrap().to_string(),
                    t.as_str().unwrap().to_string(),
                )
            })
        })
        .collect();
    gold.sort();
    predicted.sort();
    assert_eq!(predicted, gold);

    for sub in ["ingest", "graph", "stage", "decode", "eval"] {
        let m = read_json(&d.join(format!("{}.manifest.json", sub)));
        assert_eq!(m["subcommand"], sub);
        assert!(!m["files"].as_array().unwrap().is_empty());
    }
}

#[test]
fn staged_files_follow_the_trainer_format() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ingest_fixture(d);
    ok(cup(d, &["--templates", path(&fixture("templates.jsonl")), "stage"]));
    for (file, stage) in [
        ("stage_cent_ex.jsonl", "cent_ex"),
        ("stage_neigh_ex.jsonl", "neigh_ex"),
        ("stage_doc_ex.jsonl", "doc_ex"),
        ("stage_doc_ex_no_clues.jsonl", "doc_ex_no_clues"),
    ] {
        for inst in lines(&d.join(file)) {
            assert_eq!(inst["stage"], stage);
            assert!(inst["doc_id"].is_string());
            assert!(inst["event_index"].is_u64());
            let kind = inst["prompt_kind"].as_str().unwrap();
            assert!(kind == "textual" || kind == "graph");
            assert!(inst["input_text"].as_str().unwrap().starts_with("<s> "));
            assert!(inst["target_text"].is_string());
            let w = inst["loss_weight"].as_f64().unwrap();
            if kind == "graph" {
                assert_eq!(w, 0.7);
                assert!(inst["target_role"].is_string());
            } else {
                assert_eq!(w, 1.0);
                assert!(inst.get("target_role").is_none());
            }
        }
    }
    let trainer = read_json(&d.join("trainer_config.json"));
    assert_eq!(trainer["alpha"], 0.7);
    let rates: Vec<f64> =
        trainer["stages"].as_array().unwrap().iter().map(|s| s["learning_rate"].as_f64().unwrap()).collect();
    assert_eq!(rates, vec![1e-4, 5e-5, 3e-5, 2e-5]);
    assert_eq!(trainer["stages"][0]["file"], "stage_cent_ex.jsonl");
}

#[test]
fn stage_and_decode_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let templates = fixture("templates.jsonl");
    ingest_fixture(d);
    ok(cup(d, &["--templates", path(&templates), "stage"]));
    ok(cup(d, &["--templates", path(&templates), "decode"]));
    let first = (fs::read(d.join("stage.manifest.json")).unwrap(), fs::read(d.join("decode.manifest.json")).unwrap());
    ok(cup(d, &["--templates", path(&templates), "stage"]));
    ok(cup(d, &["--templates", path(&templates), "decode"]));
    let second = (fs::read(d.join("stage.manifest.json")).unwrap(), fs::read(d.join("decode.manifest.json")).unwrap());
    assert_eq!(first, second);
}

#[test]
fn missing_artifacts_name_their_producer() {
    let dir = tempfile::tempdir().unwrap();
    let out = cup(dir.path(), &["--templates", path(&fixture("templates.jsonl")), "stage"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `cup ingest` first"));
    let out = cup(dir.path(), &["eval"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `cup decode` first"));
    let out = cup(dir.path(), &["ingest"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("input is required"));
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ingest_fixture(d);
    let config = d.join("cup.toml");
    fs::write(
        &config,
        format!(
            "templates = {:?}\nalpha = 0.5\n[trainer]\nbatch_sizes = [32, 32, 16, 16]\n",
            path(&fixture("templates.jsonl"))
        ),
    )
    .unwrap();
    let alpha = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cup"));
        cmd.arg("--config").arg(&config).arg("--output-dir").arg(d).args(extra).arg("stage").env("RUST_LOG", "warn");
        match env {
            Some(v) => cmd.env("CUP_ALPHA", v),
            None => cmd.env_remove("CUP_ALPHA"),
        };
        ok(cmd.output().unwrap());
        read_json(&d.join("trainer_config.json"))
    };
    let t = alpha(&[], None);
    assert_eq!(t["alpha"], 0.5);
    assert_eq!(t["stages"][0]["batch_size"], 32);
    assert_eq!(alpha(&[], Some("0.25"))["alpha"], 0.25);
    assert_eq!(alpha(&["--alpha", "0.9"], Some("0.25"))["alpha"], 0.9);

    let out = cup(d, &["--config", path(&config), "--alpha", "0", "stage"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn stage_subset_and_separate_prediction_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let templates = fixture("templates.jsonl");
    ingest_fixture(d);
    let ablated = d.join("ablation").join("doc_only.jsonl");
    ok(cup(d, &["--templates", path(&templates), "decode", "--stages", "doc", "--predictions-out", path(&ablated)]));
    assert!(ablated.exists());
    assert!(!d.join("predictions.jsonl").exists());
    ok(cup(d, &["eval", "--predictions", path(&ablated)]));
    assert_eq!(read_json(&d.join("score.json"))["f1"], 1.0);

    let out = cup(d, &["--templates", path(&templates), "decode", "--stages", "cent,bogus"]);
    assert!(!out.status.success());
}

#[test]
fn wikievents_truncation_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let templates = fixture("templates.jsonl");
    ok(cup(d, &["--dataset-kind", "wikievents", "--input", path(&fixture("wikievents.jsonl")), "ingest"]));
    ok(cup(d, &["--templates", path(&templates), "decode"]));
    ok(cup(d, &["eval"]));
    assert_eq!(read_json(&d.join("score.json"))["recall"], 1.0);
    ok(cup(d, &["eval", "--include-dropped"]));
    let s = read_json(&d.join("score.json"));
    assert_eq!((s["correct"].as_u64(), s["gold"].as_u64()), (Some(2), Some(3)));
}
