//! Edit-distance alignment and the MER/CER/WER error rates.
//!
//! All three rates are (S+I+D)/N over a unit basis: MER over the mixed
//! token sequence, CER over codepoints of the normalized text with
//! whitespace removed, WER over whitespace-delimited words. A rate is
//! undefined (never zero) when the reference basis is empty, and is not
//! clamped when errors exceed N.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textnorm::{normalize_text, tokenize, NormConfig, TokenSequence};

/// Substitution/insertion/deletion tallies from an optimal alignment.
/// S + D + C = N always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EditCounts {
    #[serde(rename = "S")]
    pub substitutions: usize,
    #[serde(rename = "I")]
    pub insertions: usize,
    #[serde(rename = "D")]
    pub deletions: usize,
    #[serde(rename = "N")]
    pub reference_len: usize,
    #[serde(rename = "C")]
    pub correct: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// (S+I+D)/N, or None when the reference basis is empty.
    pub fn rate(&self) -> Option<f64> {
        if self.reference_len == 0 {
            None
        } else {
            Some(self.distance() as f64 / self.reference_len as f64)
        }
    }

    pub fn accumulate(&mut self, other: &EditCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_len += other.reference_len;
        self.correct += other.correct;
    }
}

/// One alignment step; indices point into the reference and hypothesis
/// slices passed to align.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match { r: usize, h: usize },
    Substitute { r: usize, h: usize },
    Delete { r: usize },
    Insert { h: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub counts: EditCounts,
    pub ops: Vec<AlignOp>,
}

const OP_START: u8 = 0;
const OP_MATCH: u8 = 1;
const OP_SUB: u8 = 2;
const OP_DEL: u8 = 3;
const OP_INS: u8 = 4;

#[derive(Clone, Copy)]
struct Cell {
    cost: u32,
    dels: u32,
    op: u8,
}

/// Optimal alignment with unit costs. Among minimal-cost scripts the one
/// with the fewest deletions is chosen (equivalently fewest insertions,
/// most substitutions), so counts are deterministic; trace ops prefer
/// Match > Substitute > Delete > Insert on exact ties.
pub fn align_slices<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Alignment {
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut grid = vec![Cell { cost: 0, dels: 0, op: OP_START }; (n + 1) * width];
    for j in 1..=m {
        grid[j] = Cell { cost: j as u32, dels: 0, op: OP_INS };
    }
    for i in 1..=n {
        grid[i * width] = Cell { cost: i as u32, dels: i as u32, op: OP_DEL };
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = grid[(i - 1) * width + (j - 1)];
            let up = grid[(i - 1) * width + j];
            let left = grid[i * width + (j - 1)];
            let mut best = Cell { cost: diag.cost + 1, dels: diag.dels, op: OP_SUB };
            if reference[i - 1] == hypothesis[j - 1] {
                best = Cell { cost: diag.cost, dels: diag.dels, op: OP_MATCH };
            }
            let del = Cell { cost: up.cost + 1, dels: up.dels + 1, op: OP_DEL };
            if (del.cost, del.dels) < (best.cost, best.dels) {
                best = del;
            }
            let ins = Cell { cost: left.cost + 1, dels: left.dels, op: OP_INS };
            if (ins.cost, ins.dels) < (best.cost, best.dels) {
                best = ins;
            }
            grid[i * width + j] = best;
        }
    }

    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    let mut counts = EditCounts { reference_len: n, ..EditCounts::default() };
    while i > 0 || j > 0 {
        match grid[i * width + j].op {
            OP_MATCH => {
                i -= 1;
                j -= 1;
                counts.correct += 1;
                ops.push(AlignOp::Match { r: i, h: j });
            }
            OP_SUB => {
                i -= 1;
                j -= 1;
                counts.substitutions += 1;
                ops.push(AlignOp::Substitute { r: i, h: j });
            }
            OP_DEL => {
                i -= 1;
                counts.deletions += 1;
                ops.push(AlignOp::Delete { r: i });
            }
            OP_INS => {
                j -= 1;
                counts.insertions += 1;
                ops.push(AlignOp::Insert { h: j });
            }
            _ => unreachable!("traceback rode past the origin"),
        }
    }
    ops.reverse();
    Alignment { counts, ops }
}

/// Token-level alignment of two tokenized utterances.
pub fn align(reference: &TokenSequence, hypothesis: &TokenSequence) -> Alignment {
    align_slices(&reference.tokens, &hypothesis.tokens)
}

/// One rendered alignment step for reports, with the token texts involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceOp {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hypothesis: Option<String>,
}

fn render_trace(ops: &[AlignOp], reference: &[String], hypothesis: &[String]) -> Vec<TraceOp> {
    ops.iter()
        .map(|op| match *op {
            AlignOp::Match { r, h } => TraceOp {
                op: "match".into(),
                reference: Some(reference[r].clone()),
                hypothesis: Some(hypothesis[h].clone()),
            },
            AlignOp::Substitute { r, h } => TraceOp {
                op: "sub".into(),
                reference: Some(reference[r].clone()),
                hypothesis: Some(hypothesis[h].clone()),
            },
            AlignOp::Delete { r } => TraceOp {
                op: "del".into(),
                reference: Some(reference[r].clone()),
                hypothesis: None,
            },
            AlignOp::Insert { h } => TraceOp {
                op: "ins".into(),
                reference: None,
                hypothesis: Some(hypothesis[h].clone()),
            },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricCounts {
    pub mer: EditCounts,
    pub cer: EditCounts,
    pub wer: EditCounts,
}

/// Per-utterance metric entry. `alignment` holds the token-level (MER)
/// trace; rates are None when their reference basis is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceEntry {
    pub id: String,
    pub mer: Option<f64>,
    pub cer: Option<f64>,
    pub wer: Option<f64>,
    pub counts: MetricCounts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alignment: Option<Vec<TraceOp>>,
}

impl UtteranceEntry {
    /// True when at least one metric has an empty reference basis.
    pub fn has_undefined_metric(&self) -> bool {
        self.mer.is_none() || self.cer.is_none() || self.wer.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMetrics {
    pub mer: Option<f64>,
    pub cer: Option<f64>,
    pub wer: Option<f64>,
    pub counts: MetricCounts,
}

/// Corpus rates are pooled: Σ(S+I+D)/ΣN over utterances whose basis is
/// non-empty, never an average of ratios. `skipped` counts utterances with
/// at least one undefined metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub utterances: Vec<UtteranceEntry>,
    pub corpus: CorpusMetrics,
    pub skipped: usize,
}

/// Evaluates one (reference, hypothesis) pair on all three bases. The id
/// is left empty; callers joining files fill it in.
pub fn evaluate_pair(ref_text: &str, hyp_text: &str, cfg: &NormConfig) -> UtteranceEntry {
    let ref_seq = tokenize(ref_text, cfg);
    let hyp_seq = tokenize(hyp_text, cfg);
    let mer_alignment = align(&ref_seq, &hyp_seq);
    let ref_texts: Vec<String> = ref_seq.tokens.iter().map(|t| t.text.clone()).collect();
    let hyp_texts: Vec<String> = hyp_seq.tokens.iter().map(|t| t.text.clone()).collect();
    let trace = render_trace(&mer_alignment.ops, &ref_texts, &hyp_texts);

    let ref_norm = normalize_text(ref_text, cfg);
    let hyp_norm = normalize_text(hyp_text, cfg);
    let ref_chars: Vec<char> = ref_norm.chars().filter(|c| !c.is_whitespace()).collect();
    let hyp_chars: Vec<char> = hyp_norm.chars().filter(|c| !c.is_whitespace()).collect();
    let cer_alignment = align_slices(&ref_chars, &hyp_chars);

    let ref_words: Vec<&str> = ref_norm.split_whitespace().collect();
    let hyp_words: Vec<&str> = hyp_norm.split_whitespace().collect();
    let wer_alignment = align_slices(&ref_words, &hyp_words);

    let counts = MetricCounts {
        mer: mer_alignment.counts,
        cer: cer_alignment.counts,
        wer: wer_alignment.counts,
    };
    UtteranceEntry {
        id: String::new(),
        mer: counts.mer.rate(),
        cer: counts.cer.rate(),
        wer: counts.wer.rate(),
        counts,
        alignment: Some(trace),
    }
}

/// Pools per-utterance counts into corpus rates. Each metric pools only
/// the utterances where its own basis is non-empty.
pub fn aggregate_corpus(entries: Vec<UtteranceEntry>) -> Result<MetricReport> {
    if entries.is_empty() {
        return Err(Error::Usage("cannot aggregate an empty set of utterances".into()));
    }
    let mut pooled = MetricCounts::default();
    let mut skipped = 0usize;
    for entry in &entries {
        if entry.has_undefined_metric() {
            skipped += 1;
        }
        if entry.counts.mer.reference_len > 0 {
            pooled.mer.accumulate(&entry.counts.mer);
        }
        if entry.counts.cer.reference_len > 0 {
            pooled.cer.accumulate(&entry.counts.cer);
        }
        if entry.counts.wer.reference_len > 0 {
            pooled.wer.accumulate(&entry.counts.wer);
        }
    }
    let corpus = CorpusMetrics {
        mer: pooled.mer.rate(),
        cer: pooled.cer.rate(),
        wer: pooled.wer.rate(),
        counts: pooled,
    };
    Ok(MetricReport { utterances: entries, corpus, skipped })
}
