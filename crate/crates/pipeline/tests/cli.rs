//! Drives the compiled `cdecr` binary end to end: generate a corpus, run
//! every stage in order against one config file, and check the error
//! surface (JSON records on stderr, non-zero exit codes).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdecr"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary spawns")
}

fn run_ok(config: &Path, args: &[&str]) -> String {
    let out = run(config, args);
    assert!(
        out.status.success(),
        "`cdecr {args:?}` failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

/// Config under `dir`: corpus + outputs inside the temp dir, plus whatever
/// sections the test needs on top of the defaults.
fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let corpus = dir.join("corpus.json");
    let out_dir = dir.join("out");
    let text = format!(
        "seed = 7\n\n[paths]\ncorpus = {corpus:?}\nout_dir = {out_dir:?}\n\n{extra}"
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).expect("config written");
    path
}

fn read_jsonl(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

#[test]
fn full_stage_flow_on_a_generated_corpus() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(
        dir.path(),
        r#"[synth]
topics = 3
sigma = 0.0
signal = 3

[splits]
train = ["t0"]
dev = ["t1"]
test = ["t2"]

[retrieval]
scope_by_topic = true

[pairwise]
learning_rate = 0.3
epochs = 300
patience = 50

[direct]
mode = "zero-shot"
"#,
    );
    let out = dir.path().join("out");

    let synth = run_ok(&config, &["synth"]);
    assert!(synth.contains("synthetic corpus: 3 topics"), "{synth}");
    assert!(dir.path().join("corpus.json").exists());

    let ingest = run_ok(&config, &["ingest"]);
    assert!(ingest.contains("corpus ok:") && ingest.contains("48 mentions"), "{ingest}");
    assert!(out.join("gold.conll").exists());

    // cold run hits the client, warm run is served entirely from the cache
    let cold = run_ok(&config, &["--mock-llm", "summarize"]);
    assert!(cold.contains("summarized 48 mentions"), "{cold}");
    assert!(!cold.contains("; 0 calls,"), "cold run should call the client: {cold}");
    let warm = run_ok(&config, &["--mock-llm", "summarize"]);
    assert!(warm.contains("; 0 calls,"), "warm run should hit only the cache: {warm}");

    let represent = run_ok(&config, &["represent"]);
    assert!(represent.contains("encoded 48 mentions at width 64"), "{represent}");

    let retrieval = run_ok(&config, &["train-retrieval"]);
    assert!(retrieval.contains("projection 64x64 trained"), "{retrieval}");

    let pairwise = run_ok(&config, &["train-pairwise"]);
    assert!(pairwise.contains("pairwise scorer trained"), "{pairwise}");

    let predict = run_ok(&config, &["predict"]);
    assert!(predict.contains("clustered 16 mentions"), "{predict}");

    // same inputs, same outputs: prediction files are byte-stable
    let clusters_path = out.join("clusters.jsonl");
    let first = std::fs::read(&clusters_path).expect("clusters written");
    run_ok(&config, &["predict"]);
    let second = std::fs::read(&clusters_path).expect("clusters rewritten");
    assert_eq!(first, second, "re-running predict must reproduce the same clustering file");

    let score = run_ok(&config, &["score"]);
    assert!(score.contains("CoNLL"), "{score}");
    let records = read_jsonl(&out.join("scores.jsonl"));
    assert_eq!(records.len(), 2, "one record per singleton mode");
    let with = records
        .iter()
        .find(|r| r["singletons"] == "with")
        .expect("with-singletons record");
    let conll = with["conll_f1"].as_f64().expect("numeric conll_f1");
    assert!(
        conll > 0.99,
        "fully separable corpus should score ~1.0, got {conll} ({records:?})"
    );

    let analyze = run_ok(&config, &["analyze"]);
    assert!(analyze.contains("link errors: fpa 0  fpt 0  fn 0"), "{analyze}");

    // direct baseline with the mock backend echoing gold labels
    let direct = run_ok(&config, &["--mock-llm", "direct"]);
    assert!(direct.contains("direct prediction over 48 mentions"), "{direct}");
    let direct_records = read_jsonl(&out.join("direct_scores.jsonl"));
    let with = direct_records
        .iter()
        .find(|r| r["singletons"] == "with")
        .expect("with-singletons record");
    assert_eq!(with["conll_f1"].as_f64(), Some(1.0), "{direct_records:?}");
}

#[test]
fn failures_exit_nonzero_with_a_json_error_record() {
    let dir = tempfile::tempdir().expect("tempdir");

    // missing corpus file
    let config = write_config(dir.path(), "");
    let out = run(&config, &["ingest"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value =
        serde_json::from_str(stderr.lines().last().expect("an error line"))
            .unwrap_or_else(|e| panic!("stderr is not a JSON record: {e}\n{stderr}"));
    assert_eq!(record["error"], serde_json::Value::Bool(true));
    assert!(
        record["message"].as_str().expect("message").contains("cannot read corpus"),
        "{record}"
    );

    // few-shot direct prediction without a demonstration topic
    run_ok(&config, &["synth"]);
    let out = run(&config, &["--mock-llm", "direct"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value =
        serde_json::from_str(stderr.lines().last().expect("an error line")).expect("JSON record");
    assert!(record["message"].as_str().expect("message").contains("demonstration"), "{record}");

    // config typos are rejected instead of silently ignored
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[paths]\nbogus = \"x\"\n").expect("config written");
    let out = run(&bad, &["ingest"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let record: serde_json::Value =
        serde_json::from_str(stderr.lines().last().expect("an error line")).expect("JSON record");
    assert_eq!(record["error"], serde_json::Value::Bool(true));
}
