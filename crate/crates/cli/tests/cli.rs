use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn alex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alex"))
        .args(args)
        .env_remove("ALEX_PROVIDER_URL")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = alex(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout(&out)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn corpus(&self, groups: usize, per_group: usize) -> PathBuf {
        let path = self.path(&format!("corpus-{groups}x{per_group}.jsonl"));
        ok(&[
            "gen-corpus",
            "--groups",
            &groups.to_string(),
            "--per-group",
            &per_group.to_string(),
            "--out",
            path_str(&path),
        ]);
        path
    }

    /// Builds an index over a 12-topic corpus at a fixed K.
    fn index(&self, k: &str) -> (PathBuf, PathBuf, Value) {
        let corpus = self.corpus(12, 10);
        let index = self.path(&format!("index-{k}.jsonl"));
        let out = ok(&[
            "build",
            "--edits",
            path_str(&corpus),
            "--k",
            k,
            "--dim",
            "128",
            "--out",
            path_str(&index),
        ]);
        (corpus, index, serde_json::from_str(&out).unwrap())
    }
}

#[test]
fn build_with_fixed_k_reports_exactly_that_many_clusters() {
    let ws = Workspace::new();
    let (_, index, report) = ws.index("12");
    assert_eq!(report["k"], 12);
    assert_eq!(report["n"], 120);
    let sizes = report["cluster_sizes"].as_array().unwrap();
    assert_eq!(sizes.len(), 12);
    assert_eq!(sizes.iter().map(|s| s.as_u64().unwrap()).sum::<u64>(), 120);
    assert!(report["diagnostics"].is_null());
    assert!(index.exists());
}

#[test]
fn automatic_k_reports_the_sweep() {
    let ws = Workspace::new();
    let (_, _, report) = ws.index("auto");
    let diagnostics = report["diagnostics"].as_array().unwrap();
    assert!(!diagnostics.is_empty());
    let k = report["k"].as_u64().unwrap();
    assert!(diagnostics.iter().any(|d| d["k"].as_u64() == Some(k)));
    for field in ["k", "inertia", "silhouette", "elbow_gap", "objective"] {
        assert!(diagnostics[0].get(field).is_some(), "missing {field}");
    }
}

#[test]
fn builds_are_reproducible() {
    let ws = Workspace::new();
    let corpus = ws.corpus(6, 8);
    let a = ws.path("a.jsonl");
    let b = ws.path("b.jsonl");
    for out in [&a, &b] {
        ok(&[
            "build",
            "--edits",
            path_str(&corpus),
            "--k",
            "auto",
            "--dim",
            "64",
            "--seed",
            "9",
            "--out",
            path_str(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn query_output_is_deterministic_and_traced() {
    let ws = Workspace::new();
    let (_, index, _) = ws.index("12");
    let query = "Where is the auroraitem3 of aurora1 aurora2 found?";
    let args = [
        "query",
        "--index",
        path_str(&index),
        "--query",
        query,
        "--trace",
    ];
    let first = ok(&args);
    let second = ok(&args);
    assert_eq!(first, second);
    assert!(first.starts_with("edit_id: "));
    assert!(first.contains("psi: "));

    let trace: Value = serde_json::from_str(first.lines().last().unwrap()).unwrap();
    let index_text = fs::read_to_string(&index).unwrap();
    let sizes: Vec<usize> = index_text
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .filter(|v| v["record"] == "cluster")
        .map(|v| v["member_ids"].as_array().unwrap().len())
        .collect();
    let selected: usize = trace["selected_clusters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| sizes[c.as_u64().unwrap() as usize])
        .sum();
    assert_eq!(
        trace["candidates_examined"].as_u64().unwrap() as usize,
        sizes.len() + selected
    );
}

#[test]
fn query_finds_the_edit_it_restates() {
    let ws = Workspace::new();
    let (corpus, index, _) = ws.index("12");
    let first_line = fs::read_to_string(&corpus)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    let edit: Value = serde_json::from_str(&first_line).unwrap();
    let out = ok(&[
        "query",
        "--index",
        path_str(&index),
        "--query",
        edit["queries"][0].as_str().unwrap(),
    ]);
    assert!(
        out.contains(&format!("text: {}", edit["text"].as_str().unwrap())),
        "{out}"
    );
}

#[test]
fn missing_or_bad_inputs_exit_with_data_error() {
    let ws = Workspace::new();
    let missing = ws.path("nope.jsonl");
    let out = alex(&[
        "build",
        "--edits",
        path_str(&missing),
        "--out",
        path_str(&ws.path("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    assert!(out.stdout.is_empty());

    let empty = ws.path("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = alex(&["query", "--index", path_str(&empty), "--query", "anything"]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = ws.path("garbage.jsonl");
    fs::write(&garbage, "not an index\n").unwrap();
    assert_eq!(
        alex(&["stats", "--index", path_str(&garbage)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(alex(&["build", "--k", "many"]).status.code(), Some(1));
    assert_eq!(alex(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(alex(&["--help"]).status.code(), Some(0));
}

#[test]
fn unreachable_sidecar_exits_with_provider_error() {
    let ws = Workspace::new();
    let corpus = ws.corpus(2, 3);
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let out = alex(&[
        "build",
        "--edits",
        path_str(&corpus),
        "--provider",
        "remote",
        "--endpoint",
        &format!("http://127.0.0.1:{port}"),
        "--timeout-ms",
        "300",
        "--out",
        path_str(&ws.path("i.jsonl")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn stats_on_a_healthy_index_reports_no_triggers() {
    let ws = Workspace::new();
    let (_, index, _) = ws.index("12");
    let out = ok(&["stats", "--index", path_str(&index)]);
    assert!(out.contains("clusters: 12"), "{out}");
    assert_eq!(out.lines().last(), Some("no adaptation triggers"), "{out}");
}

#[test]
fn eval_without_predictions_reports_retrieval_metrics_only() {
    let ws = Workspace::new();
    let (corpus, index, _) = ws.index("12");
    let out = ok(&[
        "eval",
        "--index",
        path_str(&index),
        "--records",
        path_str(&corpus),
    ]);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["records"], 120);
    assert!(report["multihop_acc"].is_null());
    assert!(report["hopwise_acc"].is_null());
    let (ca, ra) = (
        report["cluster_acc"].as_f64().unwrap(),
        report["retrieval_acc"].as_f64().unwrap(),
    );
    assert!(ra <= ca);
    assert!(ra >= 0.9, "{report}");
}

#[test]
fn bench_on_a_balanced_corpus_cuts_the_search_space() {
    let ws = Workspace::new();
    let corpus = ws.corpus(12, 25);
    let out = ok(&["bench", "--edits", path_str(&corpus), "--dim", "128"]);
    let rows: Vec<Value> = serde_json::from_str(&out).unwrap();
    let ks: Vec<u64> = rows.iter().map(|r| r["k"].as_u64().unwrap()).collect();
    assert_eq!(ks, vec![7, 10, 12, 15, 18, 20]);
    let at_12 = rows.iter().find(|r| r["k"] == 12).unwrap();
    assert!(at_12["reduction_pct"].as_f64().unwrap() >= 80.0, "{at_12}");
    assert_eq!(
        out,
        ok(&["bench", "--edits", path_str(&corpus), "--dim", "128"])
    );
}
