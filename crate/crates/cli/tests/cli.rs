use std::path::Path;
use std::process::{Command, Output};

fn newslean(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_newslean"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = newslean(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> String {
    let out = newslean(dir, args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stderr).unwrap()
}

/// A tiny synthetic workspace: 60 articles over 6 domains, narrow backbone.
fn workspace(seeds: &str) -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        tmp.path(),
        &["synth", "--dir", ".", "--articles", "60", "--domains-per-leaning", "2", "--backbone-width", "16"],
    );
    let cfg = tmp.path().join("experiment.toml");
    let text = std::fs::read_to_string(&cfg).unwrap().replace("seeds = [1, 2]", seeds);
    std::fs::write(&cfg, text).unwrap();
    tmp
}

fn csv_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn missing_corpus_exits_1_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let err = fails(tmp.path(), &["split", "--corpus", "nowhere.jsonl"], 1);
    assert!(err.contains("nowhere.jsonl"), "{err}");
}

#[test]
fn bad_fraction_is_a_config_error() {
    let tmp = workspace("seeds = [1]");
    let err = fails(tmp.path(), &["--config", "experiment.toml", "split", "--fraction", "1.5"], 1);
    assert!(err.contains("fraction"), "{err}");
}

#[test]
fn stages_report_missing_prerequisites_with_exit_3() {
    let tmp = workspace("seeds = [1]");
    let cfg = ["--config", "experiment.toml"];
    let err = fails(tmp.path(), &[&cfg[..], &["train"]].concat(), 3);
    assert!(err.contains("split"), "{err}");
    ok(tmp.path(), &[&cfg[..], &["split"]].concat());
    let err = fails(tmp.path(), &[&cfg[..], &["train"]].concat(), 3);
    assert!(err.contains("ingest-wiki"), "{err}");
    let err = fails(tmp.path(), &[&cfg[..], &["evaluate"]].concat(), 3);
    assert!(err.contains("train"), "{err}");
    ok(tmp.path(), &[&cfg[..], &["ingest-wiki"]].concat());
    let err = fails(tmp.path(), &[&cfg[..], &["train"]].concat(), 3);
    assert!(err.contains("train-embeddings"), "{err}");
}

#[test]
fn corrupted_split_file_exits_2() {
    let tmp = workspace("seeds = [1]");
    let cfg = ["--config", "experiment.toml"];
    ok(tmp.path(), &[&cfg[..], &["split"]].concat());
    let path = tmp.path().join("out/splits/media-1.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let leaked = v["train_ids"][0].clone();
    v["test_ids"].as_array_mut().unwrap().push(leaked);
    std::fs::write(&path, v.to_string()).unwrap();
    let err = fails(tmp.path(), &[&cfg[..], &["train"]].concat(), 2);
    assert!(err.contains("media-1.json"), "{err}");
}

#[test]
fn end_to_end_pipeline_with_resume() {
    let tmp = workspace("seeds = [1, 2, 3, 4]");
    let dir = tmp.path();
    let cfg = ["--config", "experiment.toml"];
    let run = |cmd: &[&str]| ok(dir, &[&cfg[..], cmd].concat());

    let ingest = run(&["ingest-wiki"]);
    assert!(ingest.contains("6 domains"), "{ingest}");
    run(&["train-embeddings"]);
    run(&["split"]);
    for seed in 1..=4 {
        assert!(dir.join(format!("out/splits/media-{seed}.json")).exists());
    }
    run(&["train"]);
    run(&["evaluate"]);
    let results = dir.join("out/results.csv");
    assert_eq!(csv_rows(&results).len(), 4);
    let header = std::fs::read_to_string(&results).unwrap();
    assert!(header.starts_with("# config_sha256: "));
    assert!(dir.join("out/accuracy_by_split.svg").exists());

    run(&["sweep"]);
    let sweep = csv_rows(&dir.join("out/sweep_beta.csv"));
    assert_eq!(sweep.len(), 5);
    let svg = std::fs::read_to_string(dir.join("out/sweep_beta.svg")).unwrap();
    assert!(svg.contains("<svg") && svg.contains("config_sha256"));

    // a second run of a finished stage is skipped under --resume
    let again = ok(dir, &["--resume", "--config", "experiment.toml", "sweep"]);
    assert!(again.contains("skipping"), "{again}");
    // but not once the configuration changes
    let changed = ok(dir, &["--resume", "--seed", "9", "--config", "experiment.toml", "sweep", "--betas", "0,1"]);
    assert!(!changed.contains("skipping"), "{changed}");
    assert_eq!(csv_rows(&dir.join("out/sweep_beta.csv")).len(), 2);

    // ingesting again finds every domain already cached
    let cached = run(&["ingest-wiki"]);
    assert!(cached.contains("6 already cached"), "{cached}");
}

#[test]
fn matrix_writes_one_row_per_cell() {
    let tmp = workspace("seeds = [1, 2]");
    let dir = tmp.path();
    let cfg_path = dir.join("experiment.toml");
    let text = std::fs::read_to_string(&cfg_path).unwrap();
    // keep the first two variants only
    let cut = text.find("[[matrix.variants]]\nid = \"news+wiki+topic-e\"").unwrap();
    let rest = &text[text.find("[run]").unwrap()..];
    std::fs::write(&cfg_path, format!("{}{}", &text[..cut], rest)).unwrap();
    let cfg = ["--config", "experiment.toml"];
    for cmd in ["ingest-wiki", "split", "matrix"] {
        ok(dir, &[&cfg[..], &[cmd]].concat());
    }
    assert_eq!(csv_rows(&dir.join("out/matrix.csv")).len(), 4);
    assert_eq!(csv_rows(&dir.join("out/matrix_ranking.csv")).len(), 2);
    assert!(csv_rows(&dir.join("out/matrix_errors.csv")).is_empty());
    let first = std::fs::read(dir.join("out/matrix.csv")).unwrap();
    std::fs::remove_file(dir.join("out/.stages.json")).unwrap();
    ok(dir, &[&cfg[..], &["matrix"]].concat());
    assert_eq!(first, std::fs::read(dir.join("out/matrix.csv")).unwrap(), "matrix output is reproducible");
}
