//! Speaker role: prompt construction with few-shot exemplar refresh, the
//! strict turn-line output format, conversation validation, and a mock
//! generator that is a pure function of (prompt, seed).

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::chat::{fenced_sections, ChatClient};
use crate::error::{Error, Result};
use crate::sha256_hex;
use crate::textnorm::{is_mixed_text, NormConfig};

use super::topics::{Topic, TopicKeywords};
use super::{Conversation, ConvStatus, PipelineConfig, ScoredConversation, Turn};

/// Snapshot of a highly scored conversation embedded as a few-shot
/// example.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub id: String,
    pub score: u8,
    pub turns: Vec<Turn>,
}

/// Current generation prompt for one topic. `hash` identifies the exact
/// prompt bytes each conversation was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptState {
    pub topic: String,
    pub base: String,
    pub exemplars: Vec<Exemplar>,
    pub text: String,
    pub hash: String,
}

impl PromptState {
    fn new(topic: &str, base: String) -> PromptState {
        let mut state =
            PromptState { topic: topic.into(), base, exemplars: Vec::new(), text: String::new(), hash: String::new() };
        state.rebuild();
        state
    }

    fn rebuild(&mut self) {
        self.text = render_prompt(&self.base, &self.exemplars);
        self.hash = sha256_hex(self.text.as_bytes());
    }
}

/// Round-one prompt: topic, keywords, format contract, mixing instruction.
pub fn base_prompt(topic: &Topic, cfg: &PipelineConfig) -> String {
    format!(
        "You are simulating {speakers} Hong Kong locals chatting casually about \"{label}\".\n\
         Relevant keywords: {keywords}\n\
         Write exactly {turns} turns, one per line, each formatted \"Speaker <n>: <text>\".\n\
         Rotate through the {speakers} speakers in order. Mix Cantonese and English naturally\n\
         inside sentences, the way locals speak in daily life.",
        speakers = cfg.speakers_per_conversation,
        label = topic.label,
        keywords = topic.keywords.join(", "),
        turns = cfg.turns_per_conversation,
    )
}

fn render_prompt(base: &str, exemplars: &[Exemplar]) -> String {
    if exemplars.is_empty() {
        return base.to_string();
    }
    let mut text = String::from(base);
    text.push_str("\n\nHere are highly rated example conversations from earlier rounds, best first:\n");
    for (i, ex) in exemplars.iter().enumerate() {
        text.push_str(&format!("Example {} (conversation {}, score {}):\n<<<\n", i + 1, ex.id, ex.score));
        for turn in &ex.turns {
            text.push_str(&format!("Speaker {}: {}\n", turn.speaker, turn.text));
        }
        text.push_str(">>>\n");
    }
    text
}

pub fn init_prompts(topics: &TopicKeywords, cfg: &PipelineConfig) -> BTreeMap<String, PromptState> {
    topics
        .topics
        .iter()
        .map(|t| (t.label.clone(), PromptState::new(&t.label, base_prompt(t, cfg))))
        .collect()
}

/// Rebuilds each topic's prompt around its `top_k` best conversations
/// from `scored` (which must already be sorted score-desc, id-asc).
/// `top_k` of zero leaves every prompt untouched.
pub fn refresh_prompts(
    prompts: &mut BTreeMap<String, PromptState>,
    scored: &[ScoredConversation],
    conversations: &[Conversation],
    top_k: usize,
) {
    if top_k == 0 {
        return;
    }
    let by_id: HashMap<&str, &Conversation> =
        conversations.iter().map(|c| (c.id.as_str(), c)).collect();
    for (topic, state) in prompts.iter_mut() {
        let exemplars: Vec<Exemplar> = scored
            .iter()
            .filter(|s| s.topic == *topic)
            .filter_map(|s| {
                let score = s.score?;
                let conv = by_id.get(s.id.as_str())?;
                (conv.status == ConvStatus::Kept)
                    .then(|| Exemplar { id: conv.id.clone(), score, turns: conv.turns.clone() })
            })
            .take(top_k)
            .collect();
        if exemplars != state.exemplars {
            state.exemplars = exemplars;
            state.rebuild();
        }
    }
}

/// Parses "Speaker <n>: <text>" lines; anything else is a parse error.
pub fn parse_conversation_text(raw: &str) -> Result<Vec<Turn>> {
    let mut turns = Vec::new();
    for line in raw.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let rest = line
            .strip_prefix("Speaker ")
            .ok_or_else(|| Error::Parse(format!("turn line lacks a speaker label: {line:?}")))?;
        let (index, text) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("turn line lacks a colon: {line:?}")))?;
        let speaker: usize = index
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad speaker index in {line:?}")))?;
        turns.push(Turn { speaker, text: text.trim().to_string() });
    }
    if turns.is_empty() {
        return Err(Error::Parse("completion contains no turn lines".into()));
    }
    Ok(turns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    WrongTurnCount,
    TooFewSpeakers,
    InsufficientMix,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::WrongTurnCount => "wrong_turn_count",
            RejectReason::TooFewSpeakers => "too_few_speakers",
            RejectReason::InsufficientMix => "insufficient_mix",
        }
    }
}

pub fn mix_fraction(turns: &[Turn]) -> f64 {
    if turns.is_empty() {
        return 0.0;
    }
    let cfg = NormConfig::default();
    let mixed = turns.iter().filter(|t| is_mixed_text(&t.text, &cfg)).count();
    mixed as f64 / turns.len() as f64
}

/// Checks the configured turn count, the two-distinct-speakers floor, and
/// the minimum fraction of code-switched turns.
pub fn validate_conversation(
    turns: &[Turn],
    cfg: &PipelineConfig,
) -> std::result::Result<(), RejectReason> {
    if turns.len() != cfg.turns_per_conversation {
        return Err(RejectReason::WrongTurnCount);
    }
    let distinct: HashSet<usize> = turns.iter().map(|t| t.speaker).collect();
    if distinct.len() < 2 {
        return Err(RejectReason::TooFewSpeakers);
    }
    if mix_fraction(turns) < cfg.min_mix_ratio {
        return Err(RejectReason::InsufficientMix);
    }
    Ok(())
}

/// Each template mixes Cantonese and English on its own, with or without
/// the keyword substituted in.
const MIXED_PHRASES: &[&str] = &[
    "講開{kw}，我今晚要開OT真係冇辦法",
    "呢排{kw}好hit，個個都喺度傾",
    "我覺得{kw}幾interesting，不如試下",
    "尋日見到個{kw}嘅post，正到不得了",
    "{kw}呢樣嘢要keep住先得㗎",
    "同事話{kw}個deal幾抵，你check下啦",
    "最近為咗{kw}日日開meeting，好攰呀",
    "不如weekend一齊研究下{kw}先",
];

const PURE_PHRASES: &[&str] = &[
    "係咩，我都唔知喎",
    "好呀，就咁話啦",
    "尋日我先諗起呢件事",
    "你慢慢講，唔使急",
    "咁樣都得，真係服咗你",
    "遲啲再算啦，而家好攰",
];

fn number_after(prompt: &str, marker: &str) -> Option<usize> {
    let rest = &prompt[prompt.find(marker)? + marker.len()..];
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

fn keywords_line(prompt: &str) -> Vec<&str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Relevant keywords: "))
        .map(|l| l.split(", ").collect())
        .unwrap_or_default()
}

/// Deterministic stand-in for an LLM speaker. With no exemplars it
/// composes from the phrase banks at a seed-chosen mixing level; once the
/// prompt carries exemplars it imitates the best one, swapping a single
/// seed-chosen turn for a fresh mixed phrase, so imitation never lowers
/// the mock judge's rubric.
#[derive(Debug, Clone, Copy)]
pub struct MockSpeaker {
    pub seed: u64,
}

impl MockSpeaker {
    fn fresh_texts(&self, call_seed: u64, turns: usize, keywords: &[&str]) -> Vec<String> {
        let mix_level = [0.25, 0.5, 0.75, 1.0][(call_seed % 4) as usize];
        let mixed_count = ((mix_level * turns as f64).ceil() as usize).min(turns);
        (0..turns)
            .map(|i| {
                let n = call_seed as usize + i;
                if i < mixed_count {
                    mixed_phrase(n, keywords.get(i % keywords.len().max(1)).copied().unwrap_or("今日"))
                } else {
                    PURE_PHRASES[n % PURE_PHRASES.len()].to_string()
                }
            })
            .collect()
    }

    fn imitate_texts(&self, call_seed: u64, turns: usize, keywords: &[&str], best: &str) -> Vec<String> {
        let mut texts: Vec<String> = best
            .lines()
            .filter_map(|l| l.split_once(':').map(|(_, t)| t.trim().to_string()))
            .collect();
        texts.truncate(turns);
        let mut pad = 0usize;
        while texts.len() < turns {
            texts.push(mixed_phrase(
                call_seed as usize + pad,
                keywords.get(pad % keywords.len().max(1)).copied().unwrap_or("今日"),
            ));
            pad += 1;
        }
        let replace_at = (call_seed % turns as u64) as usize;
        texts[replace_at] = mixed_phrase(
            (call_seed / 4) as usize,
            keywords.get((call_seed % 7) as usize % keywords.len().max(1)).copied().unwrap_or("今日"),
        );
        texts
    }
}

fn mixed_phrase(n: usize, keyword: &str) -> String {
    MIXED_PHRASES[n % MIXED_PHRASES.len()].replace("{kw}", keyword)
}

impl ChatClient for MockSpeaker {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String> {
        let turns = number_after(prompt, "Write exactly ")
            .ok_or_else(|| Error::Parse("speaker prompt lacks a turn count".into()))?;
        let speakers = number_after(prompt, "You are simulating ")
            .ok_or_else(|| Error::Parse("speaker prompt lacks a speaker count".into()))?;
        let keywords = keywords_line(prompt);
        let sections = fenced_sections(prompt);
        let texts = match sections.first() {
            None => self.fresh_texts(seed, turns, &keywords),
            Some(best) => self.imitate_texts(seed, turns, &keywords, best),
        };
        let lines: Vec<String> = texts
            .iter()
            .enumerate()
            .map(|(i, text)| format!("Speaker {}: {}", i % speakers + 1, text))
            .collect();
        Ok(lines.join("\n"))
    }

    fn identity(&self) -> String {
        format!("mock-speaker[seed={}]", self.seed)
    }
}
