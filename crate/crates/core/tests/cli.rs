//! Black-box tests of the compiled binary: process exit codes, stderr
//! shape, stdout piping, --out file behavior, and the cross-command file
//! joins that feed the comparison table.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_codemix"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary must spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr is UTF-8")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

fn write_jsonl(path: &Path, rows: &[serde_json::Value]) {
    let mut text = String::new();
    for row in rows {
        text.push_str(&row.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

fn transcript(id: &str, text: &str) -> serde_json::Value {
    serde_json::json!({ "id": id, "text": text })
}

fn utterance(id: &str, audio: &str, topic: &str, text: &str) -> serde_json::Value {
    serde_json::json!({ "id": id, "audio": audio, "duration_s": 1.0, "topic": topic, "text": text })
}

#[test]
fn help_exits_zero_and_usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let help = run_in(tmp.path(), &["--help"]);
    assert_eq!(code(&help), 0);
    assert!(stdout_of(&help).contains("Usage"));

    let no_args = run_in(tmp.path(), &[]);
    assert_eq!(code(&no_args), 1);

    let bogus = run_in(tmp.path(), &["no-such-subcommand"]);
    assert_eq!(code(&bogus), 1);

    // a library-level usage error is one "error: ..." line on stderr
    let bare_fal = run_in(tmp.path(), &["fal"]);
    assert_eq!(code(&bare_fal), 1);
    let err = stderr_of(&bare_fal);
    assert!(err.starts_with("error: "), "stderr was {err:?}");
    assert_eq!(err.trim_end_matches('\n').lines().count(), 1, "stderr was {err:?}");
}

#[test]
fn missing_input_files_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["eval", "--ref", "absent.jsonl", "--hyp", "absent.jsonl"]);
    assert_eq!(code(&out), 2);
    let err = stderr_of(&out);
    assert!(err.starts_with("error: "), "stderr was {err:?}");
    assert_eq!(err.trim_end_matches('\n').lines().count(), 1, "stderr was {err:?}");
}

#[test]
fn eval_judge_bench_report_join_into_a_comparison_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_jsonl(
        &dir.join("refs.jsonl"),
        &[
            transcript("u1", "今日去咗canteen食lunch"),
            transcript("u2", "下晝有個meeting"),
            transcript("u3", "我哋去食dinner"),
        ],
    );
    write_jsonl(
        &dir.join("hyps.jsonl"),
        &[
            transcript("u1", "今日去咗canteen食lunch"),
            transcript("u2", "下晝有個meeting"),
            transcript("u3", "我哋去食lunch"),
        ],
    );

    let eval = run_in(
        dir,
        &["eval", "--ref", "refs.jsonl", "--hyp", "hyps.jsonl", "--out", "metrics.json"],
    );
    assert_eq!(code(&eval), 0, "eval stderr: {}", stderr_of(&eval));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["utterances"].as_array().unwrap().len(), 3);
    // u3 has exactly one substituted token out of four
    assert!(metrics["corpus"]["counts"]["mer"]["S"].as_u64().unwrap() >= 1);

    let judge = run_in(
        dir,
        &["judge", "--ref", "refs.jsonl", "--hyp", "hyps.jsonl", "--seed", "7", "--out", "fidelity.json"],
    );
    assert_eq!(code(&judge), 0, "judge stderr: {}", stderr_of(&judge));
    let fidelity: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("fidelity.json")).unwrap()).unwrap();
    assert!(fidelity["mean_score"].is_number());

    std::fs::write(dir.join("a1.wav"), b"stub").unwrap();
    std::fs::write(dir.join("a2.wav"), b"stub").unwrap();
    write_jsonl(
        &dir.join("manifest.jsonl"),
        &[utterance("u1", "a1.wav", "general", "今日ok"), utterance("u2", "a2.wav", "general", "今日ok")],
    );
    let bench = run_in(
        dir,
        &[
            "bench",
            "--manifest",
            "manifest.jsonl",
            "--cmd",
            "true # {audio}",
            "--system",
            "probe",
            "--out",
            "latency.jsonl",
        ],
    );
    assert_eq!(code(&bench), 0, "bench stderr: {}", stderr_of(&bench));
    let summary: serde_json::Value = serde_json::from_str(&stdout_of(&bench)).unwrap();
    assert_eq!(summary["systems"][0]["count"], 2);
    let latency_lines =
        std::fs::read_to_string(dir.join("latency.jsonl")).unwrap().lines().count();
    assert_eq!(latency_lines, 2);

    // relative paths in the systems file resolve against its directory
    std::fs::write(
        dir.join("systems.json"),
        r#"[{"system": "probe", "metrics": "metrics.json", "fidelity": "fidelity.json", "latency": "latency.jsonl"}]"#,
    )
    .unwrap();
    let report = run_in(
        dir,
        &[
            "report",
            "--systems",
            "systems.json",
            "--format",
            "md",
            "--alpha",
            "0.5",
            "--beta",
            "0.3",
            "--gamma",
            "0.2",
            "--max-latency",
            "5",
        ],
    );
    assert_eq!(code(&report), 0, "report stderr: {}", stderr_of(&report));
    let table = stdout_of(&report);
    assert!(table.starts_with("| System | MER% | CER% | WER% | FAL |\n"), "table was {table:?}");
    assert!(table.contains("| probe | "), "table was {table:?}");
}

#[test]
fn bench_keeps_failed_records_and_streams_without_out() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("a1.wav"), b"stub").unwrap();
    std::fs::write(dir.join("a2.wav"), b"stub").unwrap();
    write_jsonl(
        &dir.join("manifest.jsonl"),
        &[utterance("u1", "a1.wav", "t", "字"), utterance("u2", "a2.wav", "t", "字")],
    );

    // all runs fail: records land on disk, the summary errors with exit 1
    let failed = run_in(
        dir,
        &["bench", "--manifest", "manifest.jsonl", "--cmd", "false # {audio}", "--out", "latency.jsonl"],
    );
    assert_eq!(code(&failed), 1, "stderr: {}", stderr_of(&failed));
    assert!(stderr_of(&failed).starts_with("error: "));
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(dir.join("latency.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|r| r["status"] == "failed"));

    // without --out the records stream to stdout as JSONL
    let streamed = run_in(
        dir,
        &["bench", "--manifest", "manifest.jsonl", "--cmd", "true # {audio}"],
    );
    assert_eq!(code(&streamed), 0);
    let rows: Vec<serde_json::Value> =
        stdout_of(&streamed).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["status"] == "ok"));
    assert_eq!(rows[0]["id"], "u1");
}

#[test]
fn dataset_validate_stats_and_split_flows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let rows: Vec<serde_json::Value> = (0..6)
        .map(|k| {
            let topic = if k < 3 { "food" } else { "tech" };
            utterance(&format!("u{k}"), &format!("a{k}.wav"), topic, "今日好hot")
        })
        .collect();
    write_jsonl(&dir.join("clean.jsonl"), &rows);

    let validate = run_in(dir, &["dataset", "validate", "--manifest", "clean.jsonl"]);
    assert_eq!(code(&validate), 0, "stderr: {}", stderr_of(&validate));
    let issues: serde_json::Value = serde_json::from_str(&stdout_of(&validate)).unwrap();
    assert_eq!(issues["issues"].as_array().unwrap().len(), 0);

    let stats = run_in(dir, &["dataset", "stats", "--manifest", "clean.jsonl", "--format", "md"]);
    assert_eq!(code(&stats), 0);
    let table = stdout_of(&stats);
    assert!(table.contains("| food | 3 |"), "table was {table:?}");
    assert!(table.contains("| total | 6 |"), "table was {table:?}");

    let split = run_in(
        dir,
        &["dataset", "split", "--manifest", "clean.jsonl", "--ratio", "0.5", "--seed", "1", "--out", "splitdir"],
    );
    assert_eq!(code(&split), 0, "stderr: {}", stderr_of(&split));
    let summary: serde_json::Value = serde_json::from_str(&stdout_of(&split)).unwrap();
    assert_eq!(
        summary["train_count"].as_u64().unwrap() + summary["test_count"].as_u64().unwrap(),
        6
    );
    for name in ["train.jsonl", "test.jsonl", "split_meta.json"] {
        assert!(dir.join("splitdir").join(name).exists(), "missing {name}");
    }

    // a bad record prints its issue and fails the command
    let mut dirty = rows.clone();
    dirty.push(utterance("u6", "a6.wav", "tech", "   "));
    write_jsonl(&dir.join("dirty.jsonl"), &dirty);
    let invalid = run_in(dir, &["dataset", "validate", "--manifest", "dirty.jsonl"]);
    assert_eq!(code(&invalid), 1);
    let issues: serde_json::Value = serde_json::from_str(&stdout_of(&invalid)).unwrap();
    assert_eq!(issues["issues"][0]["id"], "u6");
    assert!(stderr_of(&invalid).starts_with("error: "));
}

#[test]
fn tokenize_reports_mixed_tokens() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["tokenize", "--text", "今日好hot"]);
    assert_eq!(code(&out), 0);
    let lines: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    let tokens = lines[0]["tokens"].as_array().unwrap();
    assert_eq!(tokens.len(), 4);
    assert_eq!(lines[0]["counts"]["cjk_chars"], 3);
    assert_eq!(lines[0]["counts"]["latin_words"], 1);

    let csv = run_in(tmp.path(), &["tokenize", "--text", "今日好hot", "--format", "csv"]);
    assert_eq!(code(&csv), 0);
    // header plus one row per token
    assert_eq!(stdout_of(&csv).lines().count(), 5);
}

#[test]
fn fal_scores_a_single_system_from_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "fal",
            "--fidelity", "90",
            "--latency", "5",
            "--len", "20",
            "--sub", "1",
            "--del", "1",
            "--alpha", "0.5",
            "--beta", "0.3",
            "--gamma", "0.2",
            "--max-latency", "5",
        ],
    );
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    // 0.5*90 + 0.3*90 + 0.2*100 with L at the top of the scale
    let total = report["systems"][0]["total"].as_f64().unwrap();
    assert!((total - 92.0).abs() < 1e-9, "total {total}");
}

#[test]
fn generate_runs_the_mock_pipeline_from_a_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let docs = dir.join("docs");
    std::fs::create_dir_all(&docs).unwrap();
    std::fs::write(docs.join("food.txt"), "呢間餐廳嘅menu有好多dishes，啲點心好好食").unwrap();
    std::fs::write(docs.join("tech.txt"), "新出嘅smartphone處理器好快，部手機個芒靚").unwrap();
    std::fs::write(
        dir.join("pipeline.toml"),
        "rounds = 1\nconversations_per_round = 2\nnum_topics = 2\ntop_k = 1\nseed = 5\n\
         out_dir = \"outdir\"\n\n[[sources]]\nkind = \"local_dir\"\npath = \"docs\"\n",
    )
    .unwrap();

    let out = run_in(dir, &["generate", "--config", "pipeline.toml"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr_of(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(result["topics"].as_array().unwrap().len(), 2);
    assert_eq!(result["rounds"].as_array().unwrap().len(), 1);
    assert!(dir.join("outdir/run_manifest.json").exists());
    assert!(dir.join("outdir/round_1/conversations.jsonl").exists());

    // --out redirects the run directory without touching the config file
    let redirected = run_in(dir, &["generate", "--config", "pipeline.toml", "--out", "outdir2"]);
    assert_eq!(code(&redirected), 0, "stderr: {}", stderr_of(&redirected));
    assert!(dir.join("outdir2/run_manifest.json").exists());

    // config is mandatory
    let bare = run_in(dir, &["generate"]);
    assert_eq!(code(&bare), 1);
    assert!(stderr_of(&bare).starts_with("error: "));
}
