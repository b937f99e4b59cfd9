mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use ragft::error::AppError;
use ragft::{ProviderSet, Stage};

fn ingest_and_index(root: &Path) -> Stage {
    let fx = common::write_fixture(&root.join("fixture"));
    let stage = Stage::new(common::test_config(42), &root.join("work"));
    let providers = ProviderSet::mock();
    stage.ingest(&fx.docs, std::slice::from_ref(&fx.standards), &fx.questions, false).unwrap();
    stage.index(&providers, false).unwrap();
    stage
}

#[test]
fn interrupted_pairing_resumes_to_identical_journal() {
    let dir = tempfile::tempdir().unwrap();
    let stage = ingest_and_index(dir.path());
    let providers = ProviderSet::mock();
    let full = stage.pair(&providers, false, false).unwrap();
    assert!(full.processed > 10);
    let reference = fs::read(&stage.paths.pairs).unwrap();

    // Keep the first 10 records plus half of the 11th, as after a crash.
    let text = String::from_utf8(reference.clone()).unwrap();
    let mut kept: String = text.split_inclusive('\n').take(10).collect();
    let eleventh = text.split_inclusive('\n').nth(10).unwrap();
    kept.push_str(&eleventh[..eleventh.len() / 2]);
    fs::write(&stage.paths.pairs, kept).unwrap();

    let resumed = stage.pair(&providers, true, false).unwrap();
    assert_eq!(resumed.resumed, 10);
    assert_eq!(resumed.processed, full.processed - 10);
    assert_eq!(fs::read(&stage.paths.pairs).unwrap(), reference);

    assert!(matches!(stage.pair(&providers, false, false), Err(AppError::Exists(_))));
    stage.pair(&providers, false, true).unwrap();
    assert_eq!(fs::read(&stage.paths.pairs).unwrap(), reference);
}

#[test]
fn stages_refuse_to_overwrite_and_require_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let stage = ingest_and_index(dir.path());
    let providers = ProviderSet::mock();
    assert!(matches!(stage.index(&providers, false), Err(AppError::Exists(_))));
    assert!(stage.generate(&providers, false, false).is_err(), "generate ran without pairs");
    stage.pair(&providers, false, false).unwrap();
    let report = stage.generate(&providers, false, false).unwrap();
    assert!(report.export.exported > 0);
    assert!(matches!(stage.export(false, false), Err(AppError::Exists(_))));
    let again = stage.export(false, true).unwrap();
    assert_eq!(again.exported, report.export.exported);
}

#[test]
fn different_seeds_give_different_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::write_fixture(&dir.path().join("fixture"));
    let a = common::run_pipeline(&fx, &dir.path().join("a"), 42);
    let b = common::run_pipeline(&fx, &dir.path().join("b"), 43);
    assert_ne!(fs::read(&a.paths.export).unwrap(), fs::read(&b.paths.export).unwrap());
}

fn ragft(workdir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ragft")).arg("--workdir").arg(workdir).args(args).output().unwrap()
}

#[test]
fn cli_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let fx = common::write_fixture(&dir.path().join("fixture"));
    let work = dir.path().join("work");
    fs::create_dir_all(&work).unwrap();
    let config = work.join("config.json");
    fs::write(&config, r#"{ "chunking": { "chunk_tokens": 60, "overlap_tokens": 10 } }"#).unwrap();
    let cfg = config.to_str().unwrap();
    let docs = fx.docs.to_str().unwrap();
    let standards = fx.standards.to_str().unwrap();
    let questions = fx.questions.to_str().unwrap();

    let out =
        ragft(&work, &["--config", cfg, "ingest", "--docs", docs, "--standards", standards, "--questions", questions]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary.is_object());

    let again =
        ragft(&work, &["--config", cfg, "ingest", "--docs", docs, "--standards", standards, "--questions", questions]);
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).starts_with("error:"));

    for step in [&["index"][..], &["pair"], &["generate"], &["verify-dataset"]] {
        let mut args = vec!["--config", cfg];
        args.extend_from_slice(step);
        let out = ragft(&work, &args);
        assert!(out.status.success(), "{step:?}: {}", String::from_utf8_lossy(&out.stderr));
    }

    let out = ragft(&work, &["--config", cfg, "stats", "questions"]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["total_questions"], 40);
    assert!((stats["fraction"].as_f64().unwrap() - 0.1).abs() < 1e-12);

    let out = ragft(&work, &["--config", cfg, "query", "Does the user documentation contain a hazard log?"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let answer: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(answer["retrieved_docs"].as_array().unwrap().len() <= 4);

    let out = ragft(&work, &["--config", cfg, "stats", "review"]);
    assert!(out.status.success());
    let out = ragft(&work, &["--config", cfg, "stats", "dataset"]);
    assert!(out.status.success());

    assert_eq!(ragft(&work, &["no-such-command"]).status.code(), Some(2));
    let out = ragft(&work, &["--alpha", "1.5", "stats", "questions"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cli_blind_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r1: serde_json::Map<String, serde_json::Value> =
        (0..20).map(|i| (format!("q{i:02}"), format!("first {i}").into())).collect();
    let r2: serde_json::Map<String, serde_json::Value> =
        (0..20).map(|i| (format!("q{i:02}"), format!("second {i}").into())).collect();
    fs::write(d.join("r1.json"), serde_json::to_vec(&r1).unwrap()).unwrap();
    fs::write(d.join("r2.json"), serde_json::to_vec(&r2).unwrap()).unwrap();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    let (r1p, r2p, items, key) = (p("r1.json"), p("r2.json"), p("items.json"), p("key.json"));
    let out = ragft(d, &["eval-blind", "--responses-1", &r1p, "--responses-2", &r2p, "--items", &items, "--key", &key]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let items_v: Vec<serde_json::Value> = serde_json::from_slice(&fs::read(&items).unwrap()).unwrap();
    let key_v: serde_json::Value = serde_json::from_slice(&fs::read(&key).unwrap()).unwrap();
    let mut csv = String::from("item_id,label,score,rater\n");
    for item in &items_v {
        let id = item["item_id"].as_str().unwrap();
        for label in ["A", "B"] {
            let model = key_v["assignments"][id][label.to_lowercase()].as_str().unwrap();
            let score = if model == "model1" { 5 } else { 6 };
            csv.push_str(&format!("{id},{label},{score},r1\n"));
        }
    }
    fs::write(d.join("ratings.csv"), csv).unwrap();
    let out = ragft(d, &["eval-report", "--ratings", &p("ratings.csv"), "--key", &key]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["relative_display"], "20%");
    assert!(String::from_utf8_lossy(&out.stderr).contains("relative improvement: 20%"));

    fs::write(d.join("bad.csv"), "item_id,label,score,rater\nitem-0000,C,5,r\n").unwrap();
    let out = ragft(d, &["eval-report", "--ratings", &p("bad.csv"), "--key", &key]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}
