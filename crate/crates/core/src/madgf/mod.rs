//! Multi-agent conversation generation: document ingestion (Engineer),
//! quality gating (Critic), topic extraction (Manager), conversation
//! generation (Speaker), and scoring (Commentator), with top-k exemplar
//! feedback into the next round's prompts.
//!
//! Everything downstream of ingestion is deterministic for a fixed
//! (config, seed, sources) triple when both backends are mocks.

pub mod critique;
pub mod ingest;
pub mod pipeline;
pub mod speaker;
pub mod topics;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use critique::{critique, CriticRules, CritiqueReport, DropReason, Verdict};
pub use ingest::{ingest, Document, DocumentSet, IngestError, SourceSpec};
pub use pipeline::{run_pipeline, GenerationResult, RoundSummary};
pub use speaker::MockSpeaker;
pub use topics::{extract_topics, Topic, TopicKeywords};

use crate::chat::BackendConfig;
use crate::error::{Error, Result};
use crate::judge::SubScores;

/// One line of a generated conversation; speakers are 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvStatus {
    Kept,
    Rejected,
}

/// A generated conversation, persisted whether kept or rejected so the
/// loop's behavior stays auditable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub topic: String,
    pub keywords: Vec<String>,
    pub turns: Vec<Turn>,
    pub round: u32,
    pub prompt_hash: String,
    pub status: ConvStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<String>,
    pub attempts: u32,
}

/// Judge outcome for one conversation. A judging error leaves `score`
/// empty and excludes the conversation from exemplar selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredConversation {
    pub id: String,
    pub topic: String,
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_scores: Option<SubScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default = "default_conversations_per_round")]
    pub conversations_per_round: usize,
    #[serde(default = "default_speakers")]
    pub speakers_per_conversation: usize,
    #[serde(default = "default_turns")]
    pub turns_per_conversation: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_min_mix_ratio")]
    pub min_mix_ratio: f64,
    #[serde(default = "default_num_topics")]
    pub num_topics: usize,
    #[serde(default = "default_keywords_per_topic")]
    pub keywords_per_topic: usize,
    #[serde(default)]
    pub seed: u64,
    pub out_dir: PathBuf,
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_backend")]
    pub generation: BackendConfig,
    #[serde(default = "default_backend")]
    pub judge: BackendConfig,
    #[serde(default)]
    pub critic: CriticRules,
}

fn default_rounds() -> u32 {
    3
}
fn default_conversations_per_round() -> usize {
    4
}
fn default_speakers() -> usize {
    2
}
fn default_turns() -> usize {
    4
}
fn default_top_k() -> usize {
    2
}
fn default_min_mix_ratio() -> f64 {
    0.25
}
fn default_num_topics() -> usize {
    4
}
fn default_keywords_per_topic() -> usize {
    8
}
fn default_backend() -> BackendConfig {
    BackendConfig::Mock { seed: 0 }
}

impl PipelineConfig {
    pub fn from_toml_path(path: &std::path::Path) -> Result<PipelineConfig> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = toml::from_str(&raw)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.conversations_per_round == 0 {
            return Err(Error::Config("conversations_per_round must be at least 1".into()));
        }
        if self.top_k > self.conversations_per_round {
            return Err(Error::Config(format!(
                "top_k ({}) exceeds conversations_per_round ({})",
                self.top_k, self.conversations_per_round
            )));
        }
        if self.speakers_per_conversation < 2 {
            return Err(Error::Config("speakers_per_conversation must be at least 2".into()));
        }
        if self.turns_per_conversation < self.speakers_per_conversation {
            return Err(Error::Config(format!(
                "turns_per_conversation ({}) must seat every one of the {} speakers",
                self.turns_per_conversation, self.speakers_per_conversation
            )));
        }
        if !(0.0..=1.0).contains(&self.min_mix_ratio) {
            return Err(Error::Config(format!(
                "min_mix_ratio must be within [0, 1], got {}",
                self.min_mix_ratio
            )));
        }
        if self.num_topics == 0 || self.keywords_per_topic == 0 {
            return Err(Error::Config("num_topics and keywords_per_topic must be at least 1".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::Usage("pipeline needs at least one document source".into()));
        }
        Ok(())
    }
}

/// Stable per-call seed from the run seed and the call coordinates.
pub(crate) fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Filesystem-safe slug for topic labels: ASCII is lowercased, CJK kept,
/// anything else becomes '-'.
pub(crate) fn topic_slug(label: &str) -> String {
    let mut slug = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if crate::textnorm::is_cjk_char(c) {
            slug.push(c);
        } else {
            slug.push('-');
        }
    }
    slug
}
