//! Wall-clock latency harness for external transcription commands. Each
//! utterance spawns one process (cold start, sequential by default) and
//! the measured lifetimes feed the L and M inputs of the composite score.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One utterance to benchmark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchItem {
    pub id: String,
    pub audio: PathBuf,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Shell command template; `{audio}` is replaced by the escaped path.
    pub command: String,
    /// System label stamped on every record.
    pub system: String,
    /// When set, each command's stdout is saved to `<dir>/<id>.txt`.
    pub hyp_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Measured run of one command. Failed runs keep their timing but are
/// excluded from summaries and from M.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRecord {
    pub id: String,
    #[serde(rename = "L")]
    pub latency_s: f64,
    pub status: RunStatus,
    pub system: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyp_path: Option<PathBuf>,
}

impl LatencyRecord {
    pub fn succeeded(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub system: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub systems: Vec<SystemSummary>,
    /// Max successful latency across the whole comparison set.
    #[serde(rename = "M")]
    pub max_latency: f64,
}

/// Single-quotes a path for `sh -c` interpolation.
fn shell_escape(path: &str) -> String {
    if !path.is_empty()
        && path.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '/' | '_' | '-'))
    {
        path.to_string()
    } else {
        format!("'{}'", path.replace('\'', "'\\''"))
    }
}

/// Spawns the templated command for one utterance and times the whole
/// process lifetime. A nonzero exit yields a failed record, not an error;
/// only a malformed template or missing audio file aborts.
pub fn run_timed(cfg: &BenchConfig, item: &BenchItem) -> Result<LatencyRecord> {
    if !cfg.command.contains("{audio}") {
        return Err(Error::Usage(format!(
            "command template {:?} lacks the {{audio}} placeholder",
            cfg.command
        )));
    }
    if !item.audio.exists() {
        return Err(Error::Io(format!("audio file not found: {}", item.audio.display())));
    }
    let audio = item.audio.to_string_lossy();
    let command = cfg.command.replace("{audio}", &shell_escape(&audio));

    let start = Instant::now();
    let spawned = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Backend(format!("failed to spawn {command:?}: {e}")))?;
    let output = spawned
        .wait_with_output()
        .map_err(|e| Error::Backend(format!("failed waiting on {command:?}: {e}")))?;
    let latency_s = start.elapsed().as_secs_f64();

    let exit = output.status.code();
    let status = if output.status.success() { RunStatus::Ok } else { RunStatus::Failed };
    let hyp_path = match (&cfg.hyp_dir, status) {
        (Some(dir), RunStatus::Ok) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(format!("{}.txt", item.id));
            std::fs::write(&path, &output.stdout).map_err(|e| Error::io(&path, e))?;
            Some(path)
        }
        _ => None,
    };

    Ok(LatencyRecord {
        id: item.id.clone(),
        latency_s,
        status,
        system: cfg.system.clone(),
        command,
        exit,
        hyp_path,
    })
}

/// Runs every item. Sequential when `parallel <= 1` (the default mode;
/// concurrent runs contend for the machine and distort the timings).
pub fn run_many(cfg: &BenchConfig, items: &[BenchItem], parallel: usize) -> Result<Vec<LatencyRecord>> {
    if parallel <= 1 || items.len() <= 1 {
        return items.iter().map(|item| run_timed(cfg, item)).collect();
    }
    let chunk_len = items.len().div_ceil(parallel);
    let mut indexed: Vec<(usize, Result<LatencyRecord>)> = Vec::with_capacity(items.len());
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (chunk_no, chunk) in items.chunks(chunk_len).enumerate() {
            let base = chunk_no * chunk_len;
            handles.push(scope.spawn(move || {
                chunk
                    .iter()
                    .enumerate()
                    .map(|(i, item)| (base + i, run_timed(cfg, item)))
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            indexed.extend(handle.join().expect("bench worker panicked"));
        }
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Per-system stats plus the global M, all over successful records only.
pub fn summarize(records: &[LatencyRecord]) -> Result<BenchSummary> {
    let mut by_system: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for record in records.iter().filter(|r| r.succeeded()) {
        by_system.entry(&record.system).or_default().push(record.latency_s);
    }
    if by_system.is_empty() {
        return Err(Error::Usage("no successful latency records to summarize".into()));
    }
    let mut systems = Vec::new();
    let mut max_latency = f64::NEG_INFINITY;
    for (system, mut latencies) in by_system {
        latencies.sort_by(|a, b| a.partial_cmp(b).expect("latencies are finite"));
        let count = latencies.len();
        let mean = latencies.iter().sum::<f64>() / count as f64;
        let max = *latencies.last().unwrap();
        max_latency = max_latency.max(max);
        systems.push(SystemSummary {
            system: system.to_string(),
            count,
            mean,
            median: median(&latencies),
            max,
        });
    }
    Ok(BenchSummary { systems, max_latency })
}

pub fn write_latency_jsonl(path: &Path, records: &[LatencyRecord]) -> Result<()> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

pub fn read_latency_jsonl(path: &Path) -> Result<Vec<LatencyRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(lineno, line)| {
            serde_json::from_str(line).map_err(|e| {
                Error::Parse(format!("{}:{}: bad latency record: {}", path.display(), lineno + 1, e))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_audio(dir: &Path) -> PathBuf {
        let path = dir.join("utt.wav");
        std::fs::write(&path, b"RIFF").unwrap();
        path
    }

    fn item(audio: &Path) -> BenchItem {
        BenchItem { id: "u1".into(), audio: audio.to_path_buf() }
    }

    fn cfg(command: &str) -> BenchConfig {
        BenchConfig { command: command.into(), system: "sysA".into(), hyp_dir: None }
    }

    fn record(id: &str, l: f64, ok: bool, system: &str) -> LatencyRecord {
        LatencyRecord {
            id: id.into(),
            latency_s: l,
            status: if ok { RunStatus::Ok } else { RunStatus::Failed },
            system: system.into(),
            command: "test".into(),
            exit: Some(if ok { 0 } else { 1 }),
            hyp_path: None,
        }
    }

    #[test]
    fn sleep_command_times_its_own_duration() {
        let dir = tempfile::tempdir().unwrap();
        let audio = fake_audio(dir.path());
        let rec = run_timed(&cfg("sleep 0.2 # {audio}"), &item(&audio)).unwrap();
        assert!(rec.succeeded());
        assert!(rec.latency_s >= 0.2, "L = {}", rec.latency_s);
        assert!(rec.latency_s <= 0.35, "L = {}", rec.latency_s);
    }

    #[test]
    fn nonzero_exit_is_a_failed_record_not_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let audio = fake_audio(dir.path());
        let rec = run_timed(&cfg("false # {audio}"), &item(&audio)).unwrap();
        assert_eq!(rec.status, RunStatus::Failed);
        assert_eq!(rec.exit, Some(1));
    }

    #[test]
    fn template_without_audio_placeholder_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let audio = fake_audio(dir.path());
        let err = run_timed(&cfg("sleep 0.2"), &item(&audio)).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn missing_audio_file_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.wav");
        let err = run_timed(&cfg("cat {audio}"), &item(&missing)).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stdout_is_captured_as_hypothesis_when_configured() {
        let dir = tempfile::tempdir().unwrap();
        let audio = fake_audio(dir.path());
        let hyp_dir = dir.path().join("hyp");
        let mut cfg = cfg("printf '今日好hot' && cat {audio} > /dev/null");
        cfg.hyp_dir = Some(hyp_dir.clone());
        let rec = run_timed(&cfg, &item(&audio)).unwrap();
        let hyp_path = rec.hyp_path.unwrap();
        assert_eq!(hyp_path, hyp_dir.join("u1.txt"));
        assert_eq!(std::fs::read_to_string(hyp_path).unwrap(), "今日好hot");
    }

    #[test]
    fn audio_paths_with_spaces_and_quotes_survive_substitution() {
        let dir = tempfile::tempdir().unwrap();
        let audio = dir.path().join("it's a file.wav");
        std::fs::write(&audio, b"x").unwrap();
        let rec = run_timed(&cfg("cat {audio} > /dev/null"), &item(&audio)).unwrap();
        assert!(rec.succeeded(), "command was: {}", rec.command);
    }

    #[test]
    fn repeated_runs_are_measured_independently() {
        let dir = tempfile::tempdir().unwrap();
        let audio = fake_audio(dir.path());
        let items = vec![item(&audio), BenchItem { id: "u2".into(), audio: audio.clone() }];
        let recs = run_many(&cfg("true # {audio}"), &items, 1).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].id, "u1");
        assert_eq!(recs[1].id, "u2");
        assert!(recs.iter().all(|r| r.latency_s > 0.0));
    }

    #[test]
    fn summary_of_one_two_three() {
        let recs = vec![
            record("a", 1.0, true, "sysA"),
            record("b", 2.0, true, "sysA"),
            record("c", 3.0, true, "sysA"),
        ];
        let summary = summarize(&recs).unwrap();
        assert_eq!(summary.max_latency, 3.0);
        assert_eq!(summary.systems.len(), 1);
        assert_eq!(summary.systems[0].mean, 2.0);
        assert_eq!(summary.systems[0].median, 2.0);
        assert_eq!(summary.systems[0].count, 3);
    }

    #[test]
    fn single_record_sets_m() {
        let summary = summarize(&[record("a", 5.0, true, "sysA")]).unwrap();
        assert_eq!(summary.max_latency, 5.0);
    }

    #[test]
    fn failed_records_never_move_m() {
        let mut recs = vec![record("a", 2.0, true, "sysA")];
        let base = summarize(&recs).unwrap().max_latency;
        recs.push(record("b", 9.0, false, "sysA"));
        let with_failure = summarize(&recs).unwrap();
        assert_eq!(with_failure.max_latency, base);
        assert_eq!(with_failure.max_latency, 2.0);
        assert_eq!(with_failure.systems[0].count, 1);
    }

    #[test]
    fn all_failed_is_a_usage_error() {
        let err = summarize(&[record("a", 1.0, false, "sysA")]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn median_of_even_count_averages_the_middle_pair() {
        let recs = vec![
            record("a", 1.0, true, "sysA"),
            record("b", 2.0, true, "sysA"),
            record("c", 10.0, true, "sysA"),
            record("d", 4.0, true, "sysA"),
        ];
        let summary = summarize(&recs).unwrap();
        assert_eq!(summary.systems[0].median, 3.0);
    }

    #[test]
    fn systems_are_summarized_separately_under_a_shared_m() {
        let recs = vec![
            record("a", 1.0, true, "fast"),
            record("b", 10.0, true, "slow"),
        ];
        let summary = summarize(&recs).unwrap();
        assert_eq!(summary.max_latency, 10.0);
        let labels: Vec<&str> = summary.systems.iter().map(|s| s.system.as_str()).collect();
        assert_eq!(labels, vec!["fast", "slow"]);
    }

    #[test]
    fn jsonl_round_trip_preserves_records_and_key_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("latency.jsonl");
        let recs = vec![record("a", 1.5, true, "sysA"), record("b", 9.0, false, "sysA")];
        write_latency_jsonl(&path, &recs).unwrap();
        let raw = std::fs::read_to_string(&path).unwrap();
        let first = raw.lines().next().unwrap();
        for key in ["\"id\"", "\"L\"", "\"status\"", "\"system\""] {
            assert!(first.contains(key), "missing {key} in {first}");
        }
        assert!(raw.contains("\"failed\""));
        assert_eq!(read_latency_jsonl(&path).unwrap(), recs);
    }
}
