//! Manifest loading, validation, summary statistics, and the stratified
//! train/test split for mixed-language speech datasets.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textnorm::{count_stats, tokenize, NormConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accent {
    Guangzhou,
    Hongkong,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerInfo {
    pub gender: String,
    pub accent: Accent,
}

/// One manifest line. `duration_s` comes from the manifest, never from
/// decoding audio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    pub audio: PathBuf,
    pub duration_s: f64,
    pub topic: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker: Option<SpeakerInfo>,
}

/// Reads a JSONL manifest. Blank lines are allowed; anything else must
/// parse, and ids must be unique across the file.
pub fn load_manifest(path: &Path) -> Result<Vec<UtteranceRecord>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: UtteranceRecord = serde_json::from_str(line).map_err(|e| {
            Error::Parse(format!("{}:{}: bad manifest line: {}", path.display(), lineno + 1, e))
        })?;
        if let Some(first) = seen.insert(record.id.clone(), lineno + 1) {
            return Err(Error::Validation(format!(
                "{}: duplicate id {:?} on lines {} and {}",
                path.display(),
                record.id,
                first,
                lineno + 1
            )));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub id: String,
    pub message: String,
}

/// Reports every violated record invariant; an empty list means valid.
pub fn validate(records: &[UtteranceRecord]) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    for record in records {
        let mut push = |message: &str| {
            issues.push(ValidationIssue { id: record.id.clone(), message: message.to_string() })
        };
        if !(record.duration_s > 0.0) {
            push("non-positive duration");
        }
        if record.text.trim().is_empty() {
            push("empty transcript");
        }
        if record.topic.trim().is_empty() {
            push("empty topic");
        }
    }
    issues
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct TopicStats {
    pub utterances: usize,
    pub hours: f64,
    pub cjk_chars: usize,
    pub latin_words: usize,
    pub ratio_cjk_to_latin: Option<f64>,
}

impl TopicStats {
    fn absorb(&mut self, duration_s: f64, cjk: usize, latin: usize) {
        self.utterances += 1;
        self.hours += duration_s / 3600.0;
        self.cjk_chars += cjk;
        self.latin_words += latin;
    }

    fn finish(&mut self) {
        self.ratio_cjk_to_latin = if self.latin_words > 0 {
            Some(self.cjk_chars as f64 / self.latin_words as f64)
        } else {
            None
        };
    }
}

/// Duration histogram bin covering `[lower_s, lower_s + 1)`. Empty bins
/// are omitted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HistogramBin {
    pub lower_s: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub topics: BTreeMap<String, TopicStats>,
    pub total: TopicStats,
    pub duration_histogram: Vec<HistogramBin>,
    pub max_duration_s: f64,
}

/// Per-topic and global script counts plus the duration histogram.
/// Totals are exact sums of the per-topic values.
pub fn stats(records: &[UtteranceRecord], cfg: &NormConfig) -> DatasetStats {
    let mut topics: BTreeMap<String, TopicStats> = BTreeMap::new();
    let mut total = TopicStats::default();
    let mut bins: BTreeMap<u64, usize> = BTreeMap::new();
    let mut max_duration_s = 0.0f64;
    for record in records {
        let counts = count_stats(&tokenize(&record.text, cfg));
        topics.entry(record.topic.clone()).or_default().absorb(
            record.duration_s,
            counts.cjk_chars,
            counts.latin_words,
        );
        total.absorb(record.duration_s, counts.cjk_chars, counts.latin_words);
        *bins.entry(record.duration_s.max(0.0) as u64).or_insert(0) += 1;
        max_duration_s = max_duration_s.max(record.duration_s);
    }
    for topic in topics.values_mut() {
        topic.finish();
    }
    total.finish();
    DatasetStats {
        topics,
        total,
        duration_histogram: bins.into_iter().map(|(lower_s, count)| HistogramBin { lower_s, count }).collect(),
        max_duration_s,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub train: Vec<UtteranceRecord>,
    pub test: Vec<UtteranceRecord>,
    pub seed: u64,
    pub ratio: f64,
    pub topic_train_fractions: BTreeMap<String, f64>,
}

/// Independent generator per topic, so adding a topic never reshuffles
/// the others.
fn topic_rng(seed: u64, topic: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(topic.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

fn shuffle(indices: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..indices.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        indices.swap(i, j);
    }
}

/// Stratified random split: per topic, shuffle with the seeded generator
/// and take round(ratio * n) records for train, keeping both sides
/// non-empty whenever the topic has at least two records. Output order
/// follows the input manifest.
pub fn split(records: &[UtteranceRecord], ratio: f64, seed: u64) -> Result<SplitResult> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Usage(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut by_topic: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (idx, record) in records.iter().enumerate() {
        by_topic.entry(&record.topic).or_default().push(idx);
    }
    let mut in_train = vec![false; records.len()];
    let mut topic_train_fractions = BTreeMap::new();
    for (topic, mut indices) in by_topic {
        let n = indices.len();
        let mut rng = topic_rng(seed, topic);
        shuffle(&mut indices, &mut rng);
        let mut take = (ratio * n as f64 + 0.5).floor() as usize;
        if n >= 2 {
            take = take.clamp(1, n - 1);
        }
        for &idx in &indices[..take] {
            in_train[idx] = true;
        }
        topic_train_fractions.insert(topic.to_string(), take as f64 / n as f64);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (idx, record) in records.iter().enumerate() {
        if in_train[idx] {
            train.push(record.clone());
        } else {
            test.push(record.clone());
        }
    }
    Ok(SplitResult { train, test, seed, ratio, topic_train_fractions })
}

#[derive(Debug, Serialize)]
struct SplitMeta<'a> {
    seed: u64,
    ratio: f64,
    train_count: usize,
    test_count: usize,
    topic_train_fractions: &'a BTreeMap<String, f64>,
}

/// Writes `train.jsonl`, `test.jsonl`, and `split_meta.json` into `dir`.
pub fn write_split(dir: &Path, result: &SplitResult) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_manifest(&dir.join("train.jsonl"), &result.train)?;
    write_manifest(&dir.join("test.jsonl"), &result.test)?;
    let meta = SplitMeta {
        seed: result.seed,
        ratio: result.ratio,
        train_count: result.train.len(),
        test_count: result.test.len(),
        topic_train_fractions: &result.topic_train_fractions,
    };
    let path = dir.join("split_meta.json");
    let mut out = serde_json::to_vec_pretty(&meta)?;
    out.push(b'\n');
    std::fs::write(&path, out).map_err(|e| Error::io(&path, e))
}
