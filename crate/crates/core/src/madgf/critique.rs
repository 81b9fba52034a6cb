//! Critic role: document-quality gating before topic extraction. Checks
//! run in a fixed order per document (short, long, language mix,
//! duplicate) so verdicts are reproducible.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::sha256_hex;
use crate::textnorm::{is_mixed_text, NormConfig};

use super::{Document, DocumentSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticRules {
    /// Minimum text length in codepoints after trimming.
    #[serde(default = "default_min_chars")]
    pub min_chars: usize,
    #[serde(default = "default_max_chars")]
    pub max_chars: usize,
    /// Require both CJK and Latin tokens to be present.
    #[serde(default)]
    pub require_mixed: bool,
}

fn default_min_chars() -> usize {
    10
}

fn default_max_chars() -> usize {
    10_000
}

impl Default for CriticRules {
    fn default() -> CriticRules {
        CriticRules { min_chars: default_min_chars(), max_chars: default_max_chars(), require_mixed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TooShort,
    TooLong,
    WrongLanguageMix,
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Drop(DropReason),
}

/// One verdict per input document, plus the rules that produced them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CritiqueReport {
    pub verdicts: BTreeMap<String, Verdict>,
    pub rules: CriticRules,
}

/// Gates documents by the rules; among equal contents the first id in
/// lexicographic order survives. Returns the kept set and a verdict for
/// every input.
pub fn critique(docs: &DocumentSet, rules: &CriticRules) -> (DocumentSet, CritiqueReport) {
    let norm = NormConfig::default();

    // duplicate survivors: smallest id per content hash
    let mut survivor: BTreeMap<String, &str> = BTreeMap::new();
    for doc in &docs.documents {
        let hash = sha256_hex(doc.text.as_bytes());
        match survivor.get(&hash) {
            Some(&existing) if existing <= doc.id.as_str() => {}
            _ => {
                survivor.insert(hash, &doc.id);
            }
        }
    }

    let mut verdicts = BTreeMap::new();
    let mut kept_ids: HashSet<&str> = HashSet::new();
    for doc in &docs.documents {
        let len = doc.text.trim().chars().count();
        let verdict = if len < rules.min_chars {
            Verdict::Drop(DropReason::TooShort)
        } else if len > rules.max_chars {
            Verdict::Drop(DropReason::TooLong)
        } else if rules.require_mixed && !is_mixed_text(&doc.text, &norm) {
            Verdict::Drop(DropReason::WrongLanguageMix)
        } else if survivor[&sha256_hex(doc.text.as_bytes())] != doc.id {
            Verdict::Drop(DropReason::Duplicate)
        } else {
            kept_ids.insert(&doc.id);
            Verdict::Keep
        };
        verdicts.insert(doc.id.clone(), verdict);
    }

    let kept: Vec<Document> = docs
        .documents
        .iter()
        .filter(|d| kept_ids.contains(d.id.as_str()))
        .cloned()
        .collect();
    let kept_set = DocumentSet {
        documents: kept,
        provenance: docs.provenance.clone(),
        errors: Vec::new(),
    };
    (kept_set, CritiqueReport { verdicts, rules: *rules })
}
