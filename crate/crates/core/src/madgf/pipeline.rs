//! Pipeline orchestration: one ingest/critique/topic pass, then R rounds
//! of generate, score, refresh. Every conversation is persisted with its
//! round and prompt hash; the run manifest's timestamps are the only
//! non-deterministic bytes under mock backends.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::chat::{BackendConfig, ChatClient, HttpChatClient};
use crate::error::{Error, Result};
use crate::judge::{Judge, JudgeCache, JudgeRequest, SpeakerLine};

use super::critique::critique;
use super::ingest::{ingest, unix_now};
use super::speaker::{
    init_prompts, parse_conversation_text, refresh_prompts, validate_conversation, MockSpeaker,
    PromptState,
};
use super::topics::{extract_topics, TopicKeywords};
use super::{derive_seed, topic_slug, Conversation, ConvStatus, PipelineConfig, ScoredConversation};

/// Attempts per conversation before it is recorded as rejected.
const RETRY_BUDGET: u32 = 3;

pub fn generation_client(cfg: &BackendConfig) -> Result<Box<dyn ChatClient>> {
    match cfg {
        BackendConfig::Mock { seed } => Ok(Box::new(MockSpeaker { seed: *seed })),
        BackendConfig::Http { .. } => Ok(Box::new(HttpChatClient::from_config(cfg)?)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundSummary {
    pub round: u32,
    pub generated: usize,
    pub kept: usize,
    pub rejected: usize,
    pub scored: usize,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationResult {
    pub topics: Vec<String>,
    pub rounds: Vec<RoundSummary>,
    pub out_dir: PathBuf,
}

/// Topic labels to filesystem slugs, uniqued in label order.
fn unique_slugs(labels: impl Iterator<Item = String>) -> BTreeMap<String, String> {
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    let mut slugs = BTreeMap::new();
    for label in labels {
        let base = topic_slug(&label);
        let n = used.entry(base.clone()).or_insert(0);
        *n += 1;
        let slug = if *n == 1 { base } else { format!("{base}-{n}") };
        slugs.insert(label, slug);
    }
    slugs
}

/// One generation pass: `conversations_per_round` attempts per topic,
/// each retried up to the budget and recorded as kept or rejected.
pub fn generate_round(
    client: &dyn ChatClient,
    topics: &TopicKeywords,
    prompts: &BTreeMap<String, PromptState>,
    cfg: &PipelineConfig,
    round: u32,
) -> Vec<Conversation> {
    let keywords_of: BTreeMap<&str, &[String]> =
        topics.topics.iter().map(|t| (t.label.as_str(), t.keywords.as_slice())).collect();
    let slugs = unique_slugs(prompts.keys().cloned());
    let mut conversations = Vec::new();
    for (label, state) in prompts {
        let keywords = keywords_of.get(label.as_str()).copied().unwrap_or(&[]);
        'conversations: for idx in 0..cfg.conversations_per_round {
            let id = format!("r{round:02}-{}-{idx:02}", slugs[label]);
            let mut last_reason = String::from("no attempt ran");
            let mut last_turns = Vec::new();
            for attempt in 0..RETRY_BUDGET {
                let seed = derive_seed(
                    cfg.seed,
                    &[&round.to_string(), label, &idx.to_string(), &attempt.to_string()],
                );
                let raw = match client.complete(&state.text, seed) {
                    Ok(raw) => raw,
                    Err(e) => {
                        last_reason = format!("backend_error: {e}");
                        last_turns = Vec::new();
                        continue;
                    }
                };
                let turns = match parse_conversation_text(&raw) {
                    Ok(turns) => turns,
                    Err(e) => {
                        last_reason = format!("malformed_output: {e}");
                        last_turns = Vec::new();
                        continue;
                    }
                };
                match validate_conversation(&turns, cfg) {
                    Ok(()) => {
                        conversations.push(Conversation {
                            id,
                            topic: label.clone(),
                            keywords: keywords.to_vec(),
                            turns,
                            round,
                            prompt_hash: state.hash.clone(),
                            status: ConvStatus::Kept,
                            reject_reason: None,
                            attempts: attempt + 1,
                        });
                        continue 'conversations;
                    }
                    Err(reason) => {
                        last_reason = reason.as_str().to_string();
                        last_turns = turns;
                    }
                }
            }
            conversations.push(Conversation {
                id,
                topic: label.clone(),
                keywords: keywords.to_vec(),
                turns: last_turns,
                round,
                prompt_hash: state.hash.clone(),
                status: ConvStatus::Rejected,
                reject_reason: Some(last_reason),
                attempts: RETRY_BUDGET,
            });
        }
    }
    conversations
}

/// Scores the kept conversations and sorts the verdicts score-desc,
/// id-asc, with judge failures at the end. Failures never abort the
/// round; they exclude the conversation from exemplar selection.
pub fn score_round(
    judge: &Judge,
    conversations: &[Conversation],
    cache: Option<&mut JudgeCache>,
) -> Vec<ScoredConversation> {
    let kept: Vec<&Conversation> =
        conversations.iter().filter(|c| c.status == ConvStatus::Kept).collect();
    let requests: Vec<JudgeRequest> = kept
        .iter()
        .map(|c| {
            JudgeRequest::conversation_quality(
                c.turns
                    .iter()
                    .map(|t| SpeakerLine {
                        speaker: format!("Speaker {}", t.speaker),
                        text: t.text.clone(),
                    })
                    .collect(),
            )
        })
        .collect();
    let verdicts = judge.score_all(&requests, cache);
    let mut scored: Vec<ScoredConversation> = kept
        .iter()
        .zip(verdicts)
        .map(|(conv, verdict)| match verdict {
            Ok(v) => ScoredConversation {
                id: conv.id.clone(),
                topic: conv.topic.clone(),
                round: conv.round,
                score: Some(v.score),
                sub_scores: v.sub_scores,
                error: None,
            },
            Err(e) => ScoredConversation {
                id: conv.id.clone(),
                topic: conv.topic.clone(),
                round: conv.round,
                score: None,
                sub_scores: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    scored.sort_by_key(|s| (s.score.is_none(), std::cmp::Reverse(s.score.unwrap_or(0)), s.id.clone()));
    scored
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct DocumentCounts {
    ingested: usize,
    kept: usize,
    dropped: usize,
    ingest_errors: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    seed: u64,
    rounds: &'a [RoundSummary],
    topics: &'a [String],
    documents: DocumentCounts,
    generation_backend: String,
    judge_backend: String,
    started_at: u64,
    finished_at: u64,
}

pub fn run_pipeline(cfg: &PipelineConfig) -> Result<GenerationResult> {
    cfg.validate()?;
    let started_at = unix_now();

    let docs = ingest(&cfg.sources)?;
    let ingested = docs.documents.len();
    let (kept_docs, _report) = critique(&docs, &cfg.critic);
    if kept_docs.documents.is_empty() {
        return Err(Error::Usage("no documents survived critique".into()));
    }
    let topics = extract_topics(&kept_docs, cfg.num_topics, cfg.keywords_per_topic)?;
    let labels: Vec<String> = topics.topics.iter().map(|t| t.label.clone()).collect();

    let generation = generation_client(&cfg.generation)?;
    let judge = Judge::from_config(&cfg.judge)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut cache = JudgeCache::open(&cfg.out_dir.join("judge_cache.jsonl"))?;

    let mut prompts = init_prompts(&topics, cfg);
    let mut rounds = Vec::new();
    for round in 1..=cfg.rounds {
        let conversations = generate_round(generation.as_ref(), &topics, &prompts, cfg, round);
        let scored = score_round(&judge, &conversations, Some(&mut cache));

        let round_dir = cfg.out_dir.join(format!("round_{round}"));
        std::fs::create_dir_all(&round_dir).map_err(|e| Error::io(&round_dir, e))?;
        write_jsonl(&round_dir.join("conversations.jsonl"), &conversations)?;
        write_jsonl(&round_dir.join("scores.jsonl"), &scored)?;

        let kept = conversations.iter().filter(|c| c.status == ConvStatus::Kept).count();
        let scores: Vec<u8> = scored.iter().filter_map(|s| s.score).collect();
        rounds.push(RoundSummary {
            round,
            generated: conversations.len(),
            kept,
            rejected: conversations.len() - kept,
            scored: scores.len(),
            errors: scored.iter().filter(|s| s.error.is_some()).count(),
            mean_score: (!scores.is_empty())
                .then(|| scores.iter().map(|&s| s as f64).sum::<f64>() / scores.len() as f64),
        });
        refresh_prompts(&mut prompts, &scored, &conversations, cfg.top_k);
    }

    let prompts_dir = cfg.out_dir.join("prompts");
    std::fs::create_dir_all(&prompts_dir).map_err(|e| Error::io(&prompts_dir, e))?;
    let slugs = unique_slugs(prompts.keys().cloned());
    for (label, state) in &prompts {
        let path = prompts_dir.join(format!("{}.txt", slugs[label]));
        std::fs::write(&path, &state.text).map_err(|e| Error::io(&path, e))?;
    }

    let manifest = RunManifest {
        seed: cfg.seed,
        rounds: &rounds,
        topics: &labels,
        documents: DocumentCounts {
            ingested,
            kept: kept_docs.documents.len(),
            dropped: ingested - kept_docs.documents.len(),
            ingest_errors: docs.errors.len(),
        },
        generation_backend: generation.identity(),
        judge_backend: judge.identity(),
        started_at,
        finished_at: unix_now(),
    };
    let manifest_path = cfg.out_dir.join("run_manifest.json");
    let mut raw = serde_json::to_vec_pretty(&manifest)?;
    raw.push(b'\n');
    std::fs::write(&manifest_path, raw).map_err(|e| Error::io(&manifest_path, e))?;

    Ok(GenerationResult { topics: labels, rounds, out_dir: cfg.out_dir.clone() })
}
