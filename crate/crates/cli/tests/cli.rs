use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

fn retail_testset() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/retail/testset.jsonl")
}

fn t2sql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_t2sql"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_replays_cassette() {
    let out = tempfile::tempdir().unwrap();
    let o = t2sql(&[
        "generate",
        "--config",
        s(&data("toy.toml")),
        "--out",
        s(out.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("manifest:"));
    assert!(stdout(&o).contains("unique pairs:        4"));
    assert!(out.path().join("manifest.json").exists());
    assert!(out.path().join("records.jsonl").exists());
}

#[test]
fn generate_twice_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = t2sql(&[
            "generate",
            "--config",
            s(&data("toy.toml")),
            "--out",
            s(dir.path()),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["records.jsonl", "manifest.json", "stage_log.jsonl"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = t2sql(&["generate", "--config", "/nonexistent/t2sql.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/t2sql.toml"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[pipeline]\nsplit_ratoi = 0.5\n").unwrap();
    let o = t2sql(&["generate", "--config", s(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("split_ratoi"), "{}", stderr(&o));
}

#[test]
fn dry_run_makes_no_calls() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("live.toml");
    // Live mode with no endpoint configured: any client call would fail.
    std::fs::write(
        &path,
        "[llm]\nmode = \"live\"\nbase_url_env = \"T2S_TEST_UNSET_URL\"\n",
    )
    .unwrap();
    let o = t2sql(&["generate", "--config", s(&path), "--dry-run"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("configuration ok"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn pipeline_failure_exits_one_with_failed_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cassette = dir.path().join("empty.json");
    std::fs::write(&cassette, "[]\n").unwrap();
    let out = dir.path().join("out");
    let o = t2sql(&[
        "generate",
        "--config",
        s(&data("toy.toml")),
        "--cassette",
        s(&cassette),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"status\": \"failed\""));
}

#[test]
fn echo_benchmark_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let audit = dir.path().join("audit.jsonl");
    let report = dir.path().join("report.md");
    let o = t2sql(&[
        "benchmark",
        "--dataset",
        s(&retail_testset()),
        "--model",
        "echo",
        "--audit",
        s(&audit),
        "--report",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("| Models | Query Duration (Avg.) | Success Rate (%) | Accuracy Rate (%) |"));
    assert!(text.contains("| echo (SQLite) |"));
    assert!(text.contains("| 100.00% | 100.00% |"), "{text}");
    assert_eq!(std::fs::read_to_string(report).unwrap(), text);
    assert_eq!(std::fs::read_to_string(audit).unwrap().lines().count(), 21);
}

#[test]
fn mutated_benchmark_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = t2sql(&[
        "benchmark",
        "--dataset",
        s(&retail_testset()),
        "--model",
        "drop-last-column",
        "--format",
        "json",
        "--audit",
        s(&dir.path().join("a.jsonl")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let (success, accuracy) = (
        v[0]["success_rate"].as_f64().unwrap(),
        v[0]["accuracy_rate"].as_f64().unwrap(),
    );
    assert_eq!(success, 1.0);
    assert!(accuracy < success);
}

#[test]
fn benchmark_without_test_records_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let train_only = dir.path().join("train.jsonl");
    let text: String = std::fs::read_to_string(retail_testset())
        .unwrap()
        .lines()
        .filter(|l| l.contains("\"split\":\"train\""))
        .map(|l| format!("{l}\n"))
        .collect();
    assert!(!text.is_empty());
    std::fs::write(&train_only, text).unwrap();
    let o = t2sql(&["benchmark", "--dataset", s(&train_only), "--model", "echo"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no test records"));
}

#[test]
fn compare_exit_codes() {
    let o = t2sql(&["compare", s(&data("truth.csv")), s(&data("truth.csv"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"verdict\":\"correct\""));

    let o = t2sql(&["compare", s(&data("truth.csv")), s(&data("renamed.csv"))]);
    assert_eq!(o.status.code(), Some(0));

    let o = t2sql(&["compare", s(&data("truth.csv")), s(&data("short.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("row_count_mismatch"));

    let o = t2sql(&["compare", s(&data("truth.csv")), "/nonexistent.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_strict_mode() {
    let (a, b) = (data("pairs.csv"), data("pairs_swapped.csv"));
    assert_eq!(t2sql(&["compare", s(&a), s(&b)]).status.code(), Some(0));
    let o = t2sql(&["compare", s(&a), s(&b), "--mode", "strict"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("row_set_mismatch"));
}

#[test]
fn compare_json_tables() {
    let dir = tempfile::tempdir().unwrap();
    let table = r#"{"columns":[{"name":"x","cells":[{"t":"dec","v":1.0000001,"p":7}]}],"row_count":1}"#;
    let other = r#"{"columns":[{"name":"y","cells":[{"t":"dec","v":1.0,"p":1}]}],"row_count":1}"#;
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    std::fs::write(&a, table).unwrap();
    std::fs::write(&b, other).unwrap();
    assert_eq!(t2sql(&["compare", s(&a), s(&b)]).status.code(), Some(0));
    assert_eq!(
        t2sql(&["compare", s(&a), s(&b), "--tolerance", "0"])
            .status
            .code(),
        Some(1)
    );
    std::fs::write(&b, "{not json").unwrap();
    assert_eq!(t2sql(&["compare", s(&a), s(&b)]).status.code(), Some(2));
}

#[test]
fn split_resplits_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("split.jsonl");
    let o = t2sql(&[
        "split",
        "--dataset",
        s(&retail_testset()),
        "--out",
        s(&out),
        "--ratio",
        "0.5",
        "--seed",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stdout(&o).contains("train: 7 families, test: 7 families"),
        "{}",
        stdout(&o)
    );
    let bad = t2sql(&[
        "split",
        "--dataset",
        s(&retail_testset()),
        "--out",
        s(&out),
        "--ratio",
        "1.5",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}
