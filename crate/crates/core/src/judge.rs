//! LLM judge for fidelity and conversation-quality scoring, with a
//! verdict cache and a deterministic mock backend.
//!
//! The mock is a pure function of (prompt, seed): it re-extracts the texts
//! from the prompt's fenced sections and applies a fixed rubric, so loop
//! dynamics are testable with no network. Fidelity is judged against the
//! reference transcript standing in for the original audio.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::chat::{fenced_sections, BackendConfig, ChatClient, HttpChatClient};
use crate::error::{Error, Result};
use crate::sha256_hex;
use crate::textnorm::{is_mixed_text, tokenize, NormConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeTask {
    Fidelity,
    ConversationQuality,
}

impl fmt::Display for JudgeTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JudgeTask::Fidelity => f.write_str("fidelity"),
            JudgeTask::ConversationQuality => f.write_str("conversation_quality"),
        }
    }
}

/// One conversation turn as the judge sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerLine {
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeRequest {
    pub task: JudgeTask,
    pub reference_text: Option<String>,
    pub hypothesis_text: Option<String>,
    pub conversation: Option<Vec<SpeakerLine>>,
    /// Overrides the built-in rubric sentence when set.
    pub rubric: Option<String>,
}

impl JudgeRequest {
    pub fn fidelity(reference: impl Into<String>, hypothesis: impl Into<String>) -> JudgeRequest {
        JudgeRequest {
            task: JudgeTask::Fidelity,
            reference_text: Some(reference.into()),
            hypothesis_text: Some(hypothesis.into()),
            conversation: None,
            rubric: None,
        }
    }

    pub fn conversation_quality(turns: Vec<SpeakerLine>) -> JudgeRequest {
        JudgeRequest {
            task: JudgeTask::ConversationQuality,
            reference_text: None,
            hypothesis_text: None,
            conversation: Some(turns),
            rubric: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubScores {
    pub grammar: u8,
    pub diction: u8,
    pub coherence: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub score: u8,
    pub sub_scores: Option<SubScores>,
    pub raw_response: String,
    pub cache_hit: bool,
}

const FIDELITY_RUBRIC: &str = "does the system transcript capture the content and meaning of \
the original audio? 100 means fully preserved, 0 means nothing preserved.";
const QUALITY_RUBRIC: &str = "assess the grammar, diction, and coherence of the conversation, \
each from 0 to 100.";

/// Deterministic prompt template. Texts sit between `<<<`/`>>>` fence lines
/// so backends (and the mock) can recover them unambiguously.
pub fn build_prompt(req: &JudgeRequest) -> Result<String> {
    match req.task {
        JudgeTask::Fidelity => {
            let reference = req
                .reference_text
                .as_deref()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| Error::Usage("fidelity judging requires a non-empty reference text".into()))?;
            let hypothesis = req
                .hypothesis_text
                .as_deref()
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| Error::Usage("fidelity judging requires a non-empty hypothesis text".into()))?;
            let rubric = req.rubric.as_deref().unwrap_or(FIDELITY_RUBRIC);
            Ok(format!(
                "You are scoring how faithfully a transcription system captured a spoken utterance.\n\
                 Rubric: {rubric}\n\
                 Reference transcript:\n<<<\n{reference}\n>>>\n\
                 System transcript:\n<<<\n{hypothesis}\n>>>\n\
                 Respond with a single JSON object: {{\"score\": <integer 0-100>}}"
            ))
        }
        JudgeTask::ConversationQuality => {
            let turns = req
                .conversation
                .as_ref()
                .filter(|t| !t.is_empty())
                .ok_or_else(|| Error::Usage("quality judging requires a non-empty conversation".into()))?;
            let rubric = req.rubric.as_deref().unwrap_or(QUALITY_RUBRIC);
            let mut enumerated = String::new();
            for line in turns {
                enumerated.push_str(&line.speaker);
                enumerated.push_str(": ");
                enumerated.push_str(&line.text);
                enumerated.push('\n');
            }
            Ok(format!(
                "You are scoring a generated mixed Cantonese/English conversation.\n\
                 Rubric: {rubric}\n\
                 Conversation:\n<<<\n{enumerated}>>>\n\
                 Respond with a single JSON object: {{\"grammar\": <integer 0-100>, \
                 \"diction\": <integer 0-100>, \"coherence\": <integer 0-100>}}"
            ))
        }
    }
}

fn check_range(value: i64, field: &str) -> Result<u8> {
    if (0..=100).contains(&value) {
        Ok(value as u8)
    } else {
        Err(Error::Validation(format!("{field} score {value} is outside [0, 100]")))
    }
}

fn integer_field(obj: &serde_json::Value, key: &str) -> Option<i64> {
    let v = obj.get(key)?;
    if let Some(n) = v.as_i64() {
        return Some(n);
    }
    v.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)
}

/// Yields each balanced JSON object substring, string-literal aware.
fn json_objects(raw: &str) -> Vec<&str> {
    let bytes = raw.as_bytes();
    let mut found = Vec::new();
    let mut start = 0usize;
    while let Some(open) = raw[start..].find('{').map(|p| p + start) {
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (offset, &b) in bytes[open..].iter().enumerate() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_string = false;
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(open + offset + 1);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(end) => {
                found.push(&raw[open..end]);
                start = open + 1;
            }
            None => start = open + 1,
        }
    }
    found
}

fn round_half_up(x: f64) -> i64 {
    (x + 0.5).floor() as i64
}

/// Parses a backend response into a verdict. Canonical form is a JSON
/// object; "Score: NN/100" and a bare integer are accepted as fallbacks.
/// Out-of-range scores are errors, never clamped.
pub fn parse_verdict(raw: &str, task: JudgeTask) -> Result<JudgeVerdict> {
    for candidate in json_objects(raw) {
        let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) else {
            continue;
        };
        if task == JudgeTask::ConversationQuality {
            let fields = (
                integer_field(&value, "grammar"),
                integer_field(&value, "diction"),
                integer_field(&value, "coherence"),
            );
            if let (Some(g), Some(d), Some(c)) = fields {
                let sub = SubScores {
                    grammar: check_range(g, "grammar")?,
                    diction: check_range(d, "diction")?,
                    coherence: check_range(c, "coherence")?,
                };
                let mean = (g + d + c) as f64 / 3.0;
                return Ok(JudgeVerdict {
                    score: check_range(round_half_up(mean), "mean")?,
                    sub_scores: Some(sub),
                    raw_response: raw.to_string(),
                    cache_hit: false,
                });
            }
        }
        if let Some(score) = integer_field(&value, "score") {
            return Ok(JudgeVerdict {
                score: check_range(score, "verdict")?,
                sub_scores: None,
                raw_response: raw.to_string(),
                cache_hit: false,
            });
        }
    }
    static SCORE_RE: OnceLock<Regex> = OnceLock::new();
    let re = SCORE_RE
        .get_or_init(|| Regex::new(r"(?i)\bscore\s*[:=]?\s*(\d{1,3})\s*/\s*100").unwrap());
    if let Some(cap) = re.captures(raw) {
        let value: i64 = cap[1].parse().unwrap();
        return Ok(JudgeVerdict {
            score: check_range(value, "verdict")?,
            sub_scores: None,
            raw_response: raw.to_string(),
            cache_hit: false,
        });
    }
    if let Ok(value) = raw.trim().parse::<i64>() {
        return Ok(JudgeVerdict {
            score: check_range(value, "verdict")?,
            sub_scores: None,
            raw_response: raw.to_string(),
            cache_hit: false,
        });
    }
    Err(Error::Parse(format!("no score found in judge response: {raw:?}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredVerdict {
    key: String,
    task: JudgeTask,
    score: u8,
    sub_scores: Option<SubScores>,
    raw_response: String,
}

/// Append-only verdict cache keyed by SHA-256 of (task, prompt). A cache
/// without a path lives in memory only.
#[derive(Debug, Default)]
pub struct JudgeCache {
    path: Option<PathBuf>,
    entries: HashMap<String, StoredVerdict>,
}

impl JudgeCache {
    pub fn in_memory() -> JudgeCache {
        JudgeCache::default()
    }

    /// Loads an existing cache file; a missing file is an empty cache.
    pub fn open(path: &Path) -> Result<JudgeCache> {
        let mut cache = JudgeCache { path: Some(path.to_path_buf()), entries: HashMap::new() };
        let raw = match std::fs::read_to_string(path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(Error::io(path, e)),
        };
        for (lineno, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: StoredVerdict = serde_json::from_str(line).map_err(|e| {
                Error::Parse(format!("{}:{}: bad cache line: {}", path.display(), lineno + 1, e))
            })?;
            cache.entries.insert(entry.key.clone(), entry);
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn get(&self, key: &str) -> Option<&StoredVerdict> {
        self.entries.get(key)
    }

    fn put(&mut self, entry: StoredVerdict) -> Result<()> {
        if let Some(path) = &self.path {
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let mut line = serde_json::to_string(&entry)?;
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        self.entries.insert(entry.key.clone(), entry);
        Ok(())
    }
}

pub fn cache_key(task: JudgeTask, prompt: &str) -> String {
    sha256_hex(format!("{task}\n{prompt}").as_bytes())
}

/// Mock scorer. Fidelity: token-overlap F1 between the fenced texts,
/// scaled to 0-100. Quality: diction follows the fraction of turns mixing
/// CJK and Latin tokens, coherence follows turn count (saturating at 6),
/// grammar averages the two. Pure in (prompt, seed); the rubric itself
/// uses no randomness, so scores are stable for any seed.
#[derive(Debug, Clone, Copy)]
pub struct MockJudgeClient {
    pub seed: u64,
}

fn token_multiset(text: &str) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for token in tokenize(text, &NormConfig::default()).tokens {
        *counts.entry(token.text).or_insert(0) += 1;
    }
    counts
}

/// Multiset token-overlap F1 scaled to an integer 0-100.
pub fn overlap_fidelity(reference: &str, hypothesis: &str) -> u8 {
    let ref_counts = token_multiset(reference);
    let hyp_counts = token_multiset(hypothesis);
    let ref_total: usize = ref_counts.values().sum();
    let hyp_total: usize = hyp_counts.values().sum();
    let overlap: usize = ref_counts
        .iter()
        .map(|(token, &count)| count.min(hyp_counts.get(token).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 || ref_total == 0 || hyp_total == 0 {
        return 0;
    }
    let precision = overlap as f64 / hyp_total as f64;
    let recall = overlap as f64 / ref_total as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    round_half_up(100.0 * f1) as u8
}

/// Mock quality sub-scores from the turn texts.
pub fn mock_quality_scores(turn_texts: &[String]) -> SubScores {
    let total = turn_texts.len().max(1);
    let mixed = turn_texts.iter().filter(|t| is_mixed_text(t, &NormConfig::default())).count();
    let mix = mixed as f64 / total as f64;
    let turn_factor = (turn_texts.len().min(6)) as f64 / 6.0;
    SubScores {
        grammar: round_half_up(100.0 * (0.5 * mix + 0.5 * turn_factor)) as u8,
        diction: round_half_up(100.0 * mix) as u8,
        coherence: round_half_up(100.0 * turn_factor) as u8,
    }
}

impl ChatClient for MockJudgeClient {
    fn complete(&self, prompt: &str, _seed: u64) -> Result<String> {
        let sections = fenced_sections(prompt);
        if prompt.starts_with("You are scoring how faithfully") {
            let [reference, hypothesis] = sections[..] else {
                return Err(Error::Parse("fidelity prompt missing its two fenced texts".into()));
            };
            let score = overlap_fidelity(reference, hypothesis);
            Ok(format!("{{\"score\": {score}}}"))
        } else if prompt.starts_with("You are scoring a generated") {
            let [conversation] = sections[..] else {
                return Err(Error::Parse("quality prompt missing its fenced conversation".into()));
            };
            let texts: Vec<String> = conversation
                .lines()
                .filter_map(|line| line.split_once(':').map(|(_, text)| text.trim().to_string()))
                .collect();
            let s = mock_quality_scores(&texts);
            Ok(format!(
                "{{\"grammar\": {}, \"diction\": {}, \"coherence\": {}}}",
                s.grammar, s.diction, s.coherence
            ))
        } else {
            Err(Error::Parse("mock judge received an unrecognized prompt shape".into()))
        }
    }

    fn identity(&self) -> String {
        format!("mock[seed={}]", self.seed)
    }
}

/// Scoring front end: builds prompts, consults the cache, dispatches to
/// the backend, parses, and records. Counts actual backend calls so cache
/// behavior is observable.
pub struct Judge {
    client: Box<dyn ChatClient>,
    parallelism: usize,
    calls: AtomicUsize,
}

impl Judge {
    pub fn from_config(cfg: &BackendConfig) -> Result<Judge> {
        let (client, parallelism): (Box<dyn ChatClient>, usize) = match cfg {
            BackendConfig::Mock { seed } => (Box::new(MockJudgeClient { seed: *seed }), 1),
            BackendConfig::Http { .. } => {
                (Box::new(HttpChatClient::from_config(cfg)?), cfg.parallelism())
            }
        };
        Ok(Judge { client, parallelism, calls: AtomicUsize::new(0) })
    }

    pub fn identity(&self) -> String {
        self.client.identity()
    }

    /// Backend calls issued so far (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn request_score(
        &self,
        req: &JudgeRequest,
        cache: Option<&mut JudgeCache>,
    ) -> Result<JudgeVerdict> {
        let prompt = build_prompt(req)?;
        let key = cache_key(req.task, &prompt);
        if let Some(cache) = &cache {
            if let Some(hit) = cache.get(&key) {
                return Ok(JudgeVerdict {
                    score: hit.score,
                    sub_scores: hit.sub_scores,
                    raw_response: hit.raw_response.clone(),
                    cache_hit: true,
                });
            }
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let raw = self.client.complete(&prompt, 0)?;
        let verdict = parse_verdict(&raw, req.task)?;
        if let Some(cache) = cache {
            cache.put(StoredVerdict {
                key,
                task: req.task,
                score: verdict.score,
                sub_scores: verdict.sub_scores,
                raw_response: verdict.raw_response.clone(),
            })?;
        }
        Ok(verdict)
    }

    /// Scores a batch, preserving order. Uncached requests go to the
    /// backend, concurrently up to the configured parallelism; the cache
    /// is written only from this thread.
    pub fn score_all(
        &self,
        requests: &[JudgeRequest],
        mut cache: Option<&mut JudgeCache>,
    ) -> Vec<Result<JudgeVerdict>> {
        if self.parallelism <= 1 || requests.len() <= 1 {
            return requests
                .iter()
                .map(|r| self.request_score(r, cache.as_deref_mut()))
                .collect();
        }
        let prompts: Vec<Result<String>> = requests.iter().map(build_prompt).collect();
        let mut results: Vec<Option<Result<JudgeVerdict>>> = Vec::new();
        let mut pending: Vec<(usize, &str, JudgeTask)> = Vec::new();
        for (idx, (req, prompt)) in requests.iter().zip(&prompts).enumerate() {
            match prompt {
                Err(e) => results.push(Some(Err(clone_error(e)))),
                Ok(prompt) => {
                    let key = cache_key(req.task, prompt);
                    let hit = cache.as_ref().and_then(|c| c.get(&key));
                    if let Some(hit) = hit {
                        results.push(Some(Ok(JudgeVerdict {
                            score: hit.score,
                            sub_scores: hit.sub_scores,
                            raw_response: hit.raw_response.clone(),
                            cache_hit: true,
                        })));
                    } else {
                        results.push(None);
                        pending.push((idx, prompt.as_str(), req.task));
                    }
                }
            }
        }
        let mut raw_results: Vec<(usize, Result<String>)> = Vec::with_capacity(pending.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in pending.chunks(pending.len().div_ceil(self.parallelism)) {
                handles.push(scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(idx, prompt, _)| {
                            self.calls.fetch_add(1, Ordering::SeqCst);
                            (*idx, self.client.complete(prompt, 0))
                        })
                        .collect::<Vec<_>>()
                }));
            }
            for handle in handles {
                raw_results.extend(handle.join().expect("judge worker panicked"));
            }
        });
        for (idx, raw) in raw_results {
            let task = requests[idx].task;
            let outcome = raw.and_then(|raw| parse_verdict(&raw, task));
            if let (Ok(verdict), Some(cache)) = (&outcome, cache.as_deref_mut()) {
                let key = cache_key(task, prompts[idx].as_ref().unwrap());
                if let Err(e) = cache.put(StoredVerdict {
                    key,
                    task,
                    score: verdict.score,
                    sub_scores: verdict.sub_scores,
                    raw_response: verdict.raw_response.clone(),
                }) {
                    results[idx] = Some(Err(e));
                    continue;
                }
            }
            results[idx] = Some(outcome);
        }
        results.into_iter().map(|r| r.expect("every slot filled")).collect()
    }
}

/// Error lacks Clone (io sources); reconstruct by category for fan-out.
fn clone_error(e: &Error) -> Error {
    match e {
        Error::Usage(m) => Error::Usage(m.clone()),
        Error::Config(m) => Error::Config(m.clone()),
        Error::Validation(m) => Error::Validation(m.clone()),
        Error::Parse(m) => Error::Parse(m.clone()),
        Error::Io(m) => Error::Io(m.clone()),
        Error::Backend(m) => Error::Backend(m.clone()),
    }
}
