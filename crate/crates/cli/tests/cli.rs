use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use typoguard_core::features::{FEATURE_NAMES, LABEL_COLUMN};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/bz2fiel").canonicalize().unwrap()
}

fn typoguard(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_typoguard")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SCAN: [&str; 7] = ["--ecosystem", "pypi", "--offline", "--cache-dir", "cache", "--snapshot-time", "2024-06-01T00:00:00Z"];

fn scan(name: &str) -> Output {
    let mut args = SCAN.to_vec();
    args.extend(["scan", name]);
    typoguard(&args, &fixture())
}

fn record(name: &str, downloads: u64) -> String {
    format!(r#"{{"name":"{name}","ecosystem":"npm","downloads":{downloads},"repository_url":"https://github.com/x/{name}","version_count":12}}"#)
}

fn feature_csv(rows: &[(f64, u8)]) -> String {
    let mut s = FEATURE_NAMES.join(",");
    s.push(',');
    s.push_str(LABEL_COLUMN);
    s.push('\n');
    for (v, y) in rows {
        let cells: Vec<String> = (0..FEATURE_NAMES.len()).map(|i| format!("{}", v + i as f64 / 100.0)).collect();
        s.push_str(&format!("{},{y}\n", cells.join(",")));
    }
    s
}

#[test]
fn index_build_from_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [record("react", 1_000_000), record("lodash", 2_000_000), record("express", 500_000)].join("\n");
    std::fs::write(dir.path().join("store.jsonl"), lines + "\n").unwrap();
    let out = typoguard(&["index-build"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("indexed 3 npm entries"));
    assert!(dir.path().join("index.bin").exists());
}

#[test]
fn index_build_reports_corrupt_line() {
    let dir = tempfile::tempdir().unwrap();
    let lines = format!("{}\n{{\"name\": \"broken\"\n{}\n", record("react", 10), record("vue", 10));
    std::fs::write(dir.path().join("store.jsonl"), lines).unwrap();
    let out = typoguard(&["index-build"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn index_build_rejects_duplicate_keys() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [record("react", 10), record("React", 20)].join("\n");
    std::fs::write(dir.path().join("store.jsonl"), lines).unwrap();
    let out = typoguard(&["index-build"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("same key"), "{}", stderr(&out));
}

#[test]
fn scan_exit_codes() {
    let benign = scan("bz2file");
    assert_eq!(benign.status.code(), Some(0), "{}", stderr(&benign));
    let confusion = scan("bz2fiel");
    assert_eq!(confusion.status.code(), Some(2), "{}", stderr(&confusion));
    let report: serde_json::Value = serde_json::from_slice(&confusion.stdout).unwrap();
    assert_eq!(report["decision"], "confusion");
    assert_eq!(report["threat_report"]["best"]["record"]["name"], "bz2file");
}

#[test]
fn offline_cold_store_is_an_error() {
    let out = scan("reqeusts");
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("populate the store"), "{}", stderr(&out));
}

#[test]
fn scan_batch_reports_worst_outcome() {
    let mut args = SCAN.to_vec();
    args.extend(["--output", "csv", "scan-batch", "bz2file", "reqeusts"]);
    let out = typoguard(&args, &fixture());
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 3);
    args.push("bz2fiel");
    assert_eq!(typoguard(&args, &fixture()).status.code(), Some(2));
}

#[test]
fn no_content_routes_to_companion() {
    let mut args = SCAN.to_vec();
    args.extend(["--no-content", "scan", "bz2fiel"]);
    let out = typoguard(&args, &fixture());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["model_route"], "metadata-full");
    for name in &FEATURE_NAMES[14..18] {
        assert_eq!(report["feature_vector"]["values"][name], -1.0);
    }
}

#[test]
fn train_rejects_single_class() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, u8)> = (0..20).map(|i| (i as f64 / 20.0, 0)).collect();
    std::fs::write(dir.path().join("t.csv"), feature_csv(&rows)).unwrap();
    let out = typoguard(&["train", "t.csv", "--trees", "5", "--max-depth", "none", "--min-leaf", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("single class"), "{}", stderr(&out));
    assert!(!dir.path().join("model.bin").exists());
}

#[test]
fn train_lists_schema_problems() {
    let dir = tempfile::tempdir().unwrap();
    let csv = feature_csv(&[(0.1, 0), (0.9, 1)]).replacen("max_levenshtein", "max_lev", 1);
    std::fs::write(dir.path().join("t.csv"), csv).unwrap();
    let out = typoguard(&["train", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("missing 'max_levenshtein'") && err.contains("unexpected 'max_lev'"), "{err}");
}

#[test]
fn train_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<(f64, u8)> = (0..40).map(|i| (i as f64 / 40.0, u8::from(i >= 20))).collect();
    std::fs::write(dir.path().join("t.csv"), feature_csv(&rows)).unwrap();
    let out = typoguard(&["train", "t.csv", "--trees", "10", "--max-depth", "none", "--min-leaf", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["rows"], 40);
    assert!(dir.path().join("model.bin").exists());
}

#[test]
fn eval_tdr_on_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pairs.csv"), "suspect,target,label,ecosystem\n").unwrap();
    let out = typoguard(&["eval-tdr", "pairs.csv", "--strategy", "all"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "[]");
}

#[test]
fn eval_tdr_on_fixture_index() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pairs.csv"), "suspect,target,label,ecosystem\nbz2fiel,bz2file,1,pypi\nnumpi,,1,pypi\n").unwrap();
    let index = fixture().join("index.bin");
    let out = typoguard(
        &["--ecosystem", "pypi", "--index", index.to_str().unwrap(), "--output", "csv", "eval-tdr", "pairs.csv", "--k", "1,3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("hybrid,1,1,1,1"), "{stdout}");
    assert!(stderr(&out).contains("skipped 1"));
}

#[test]
fn ablate_requires_ss() {
    let out = typoguard(&["ablate", "train.csv", "--configs", "MQ+TS"], &fixture());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("SS"), "{}", stderr(&out));
}

#[test]
fn ablate_deduplicates_configs() {
    let args = ["--output", "csv", "ablate", "train.csv", "--configs", "SS+MQ,MQ+SS", "--trees", "10", "--max-depth", "8", "--min-leaf", "1"];
    let out = typoguard(&args, &fixture());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("duplicate configuration SS+MQ"), "{}", stderr(&out));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 2);
}

fn schema(name: &str) -> serde_json::Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &serde_json::Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn report_matches_schema_keys() {
    let report: serde_json::Value = serde_json::from_slice(&scan("bz2fiel").stdout).unwrap();
    let s = schema("report.schema.json");
    assert_eq!(keys(&report), keys(&s["properties"]));
    assert_eq!(report["schema_version"], s["properties"]["schema_version"]["const"]);
    for path in ["input", "threat_report", "timings"] {
        assert_eq!(keys(&report[path]), keys(&s["properties"][path]["properties"]), "{path}");
    }
    let fv = &s["properties"]["feature_vector"]["properties"];
    assert_eq!(keys(&report["feature_vector"]["values"]), keys(&fv["values"]["properties"]));
    assert_eq!(keys(&report["feature_vector"]["completeness"]), keys(&fv["completeness"]["properties"]));
}

#[test]
fn store_lines_match_record_schema() {
    let s = schema("record.schema.json");
    let store = std::fs::read_to_string(fixture().join("store.jsonl")).unwrap();
    for line in store.lines() {
        let rec: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(keys(&rec), keys(&s["properties"]));
    }
}
