//! Manager role: TF-IDF keyword scoring over the kept documents, then
//! clustering by dominant seed keyword. Candidate terms are Latin words,
//! CJK characters, and adjacent-CJK bigrams (so multi-character words
//! like 餐廳 can surface without a segmenter). Deterministic throughout:
//! score ties break lexicographically, assignment ties break by seed rank.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::textnorm::{is_cjk_char, normalize_text, tokenize, NormConfig, TokenKind};

use super::DocumentSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topic {
    pub label: String,
    /// Ranked best-first, at most the configured k.
    pub keywords: Vec<String>,
    /// Ids of the documents assigned to this topic.
    pub support: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopicKeywords {
    pub topics: Vec<Topic>,
}

/// Function words excluded from keyword candidacy; content words stay.
const STOP_LATIN: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "but", "by", "can", "could", "did", "do", "does", "for", "from", "had", "has",
    "have", "he", "her", "here", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just",
    "me", "more", "most", "my", "no", "not", "of", "on", "or", "our", "out", "over", "she", "so",
    "some", "than", "that", "the", "their", "them", "then", "there", "these", "they", "this",
    "those", "to", "too", "up", "us", "very", "was", "we", "were", "what", "when", "where",
    "which", "who", "why", "will", "with", "would", "you", "your",
];

const STOP_CJK: &[&str] = &[
    "嘅", "咗", "喺", "啦", "呀", "㗎", "咩", "呢", "吖", "啊", "嘛", "囉", "喎", "咁", "噉",
    "就", "都", "同", "又", "亦", "但", "因", "為", "係", "唔", "冇", "有", "無", "我", "你",
    "佢", "哋", "個", "啲", "之", "的", "了", "和", "是", "在", "也", "很", "要", "會", "可",
    "以", "去", "嚟", "返", "到", "得", "話", "講", "乜", "點", "做", "咪", "先", "再", "仲",
    "而", "或", "與", "及", "對", "把", "被", "讓", "上", "下", "裏", "裡", "面", "度", "一",
    "兩", "幾", "好", "多", "少", "大", "細", "小", "呵", "喇", "添", "罷", "啩", "架", "既",
];

fn stopwords() -> HashSet<&'static str> {
    STOP_LATIN.iter().chain(STOP_CJK).copied().collect()
}

fn is_stop_char(c: char, stop: &HashSet<&str>) -> bool {
    stop.contains(c.to_string().as_str())
}

/// Per-document term frequencies over keyword-eligible terms: Latin word
/// tokens, non-stop CJK characters, and bigrams of adjacent CJK
/// characters whose halves are both non-stop.
fn term_frequencies(text: &str, stop: &HashSet<&str>, cfg: &NormConfig) -> HashMap<String, usize> {
    let mut tf = HashMap::new();
    for token in tokenize(text, cfg).tokens {
        if token.kind == TokenKind::LatinWord && !stop.contains(token.text.as_str()) {
            *tf.entry(token.text).or_insert(0) += 1;
        }
    }
    let normalized = normalize_text(text, cfg);
    let mut run: Vec<char> = Vec::new();
    let flush = |run: &mut Vec<char>, tf: &mut HashMap<String, usize>| {
        for &c in run.iter() {
            if !is_stop_char(c, stop) {
                *tf.entry(c.to_string()).or_insert(0) += 1;
            }
        }
        for pair in run.windows(2) {
            if !is_stop_char(pair[0], stop) && !is_stop_char(pair[1], stop) {
                *tf.entry(pair.iter().collect()).or_insert(0) += 1;
            }
        }
        run.clear();
    };
    for c in normalized.chars() {
        if is_cjk_char(c) {
            run.push(c);
        } else {
            flush(&mut run, &mut tf);
        }
    }
    flush(&mut run, &mut tf);
    tf
}

/// Smoothed inverse document frequency; stays positive even for terms in
/// every document.
fn idf(doc_count: usize, df: usize) -> f64 {
    ((1.0 + doc_count as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Ranks `scores` descending, ties broken by term, returning the terms.
fn ranked_terms(scores: &HashMap<String, f64>) -> Vec<String> {
    let mut terms: Vec<(&String, &f64)> = scores.iter().collect();
    terms.sort_by(|a, b| b.1.partial_cmp(a.1).expect("finite scores").then_with(|| a.0.cmp(b.0)));
    terms.into_iter().map(|(t, _)| t.clone()).collect()
}

/// Groups documents into at most `num_topics` clusters around the highest
/// scoring seed keywords, labels each cluster with its own top keyword,
/// and returns up to `k` keywords per topic. Seed keywords are taken in
/// rank order but must each cover a document set not already covered
/// exactly, otherwise the top terms of one subject would eat every slot.
pub fn extract_topics(docs: &DocumentSet, num_topics: usize, k: usize) -> Result<TopicKeywords> {
    if docs.documents.is_empty() {
        return Err(Error::Usage("cannot extract topics from an empty corpus".into()));
    }
    if num_topics == 0 || k == 0 {
        return Err(Error::Usage("num_topics and k must be at least 1".into()));
    }
    let stop = stopwords();
    let cfg = NormConfig::default();
    let doc_tfs: Vec<HashMap<String, usize>> =
        docs.documents.iter().map(|d| term_frequencies(&d.text, &stop, &cfg)).collect();

    let mut df: HashMap<&str, usize> = HashMap::new();
    for tf in &doc_tfs {
        for term in tf.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::Usage("no keyword candidates survive the stopword filter".into()));
    }
    let n = docs.documents.len();
    let mut global: HashMap<String, f64> = HashMap::new();
    for tf in &doc_tfs {
        for (term, &count) in tf {
            *global.entry(term.clone()).or_insert(0.0) += count as f64 * idf(n, df[term.as_str()]);
        }
    }

    let mut seeds: Vec<String> = Vec::new();
    let mut covered: Vec<BTreeSet<usize>> = Vec::new();
    for term in ranked_terms(&global) {
        let support: BTreeSet<usize> = doc_tfs
            .iter()
            .enumerate()
            .filter(|(_, tf)| tf.contains_key(&term))
            .map(|(i, _)| i)
            .collect();
        if covered.contains(&support) {
            continue;
        }
        seeds.push(term);
        covered.push(support);
        if seeds.len() == num_topics {
            break;
        }
    }

    // each document joins the seed it mentions most; silent documents
    // fall to the top seed
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); seeds.len()];
    for (doc_idx, tf) in doc_tfs.iter().enumerate() {
        let mut best = 0usize;
        let mut best_count = 0usize;
        for (rank, seed) in seeds.iter().enumerate() {
            let count = tf.get(seed).copied().unwrap_or(0);
            if count > best_count {
                best = rank;
                best_count = count;
            }
        }
        clusters[best].push(doc_idx);
    }

    let mut topics = Vec::new();
    let mut label_uses: BTreeMap<String, usize> = BTreeMap::new();
    for (rank, members) in clusters.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let mut scores: HashMap<String, f64> = HashMap::new();
        for &doc_idx in members {
            for (term, &count) in &doc_tfs[doc_idx] {
                *scores.entry(term.clone()).or_insert(0.0) +=
                    count as f64 * idf(n, df[term.as_str()]);
            }
        }
        let keywords: Vec<String> = ranked_terms(&scores).into_iter().take(k).collect();
        let base_label = keywords.first().cloned().unwrap_or_else(|| seeds[rank].clone());
        let uses = label_uses.entry(base_label.clone()).or_insert(0);
        *uses += 1;
        let label = if *uses == 1 { base_label } else { format!("{base_label}-{uses}") };
        topics.push(Topic {
            label,
            keywords,
            support: members.iter().map(|&i| docs.documents[i].id.clone()).collect(),
        });
    }
    topics.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(TopicKeywords { topics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::madgf::Document;

    fn doc(id: &str, text: &str) -> Document {
        Document { id: id.into(), source: format!("{id}.txt"), text: text.into(), fetched_at: None }
    }

    fn set(docs: Vec<Document>) -> DocumentSet {
        DocumentSet { documents: docs, provenance: vec![], errors: vec![] }
    }

    #[test]
    fn food_documents_cluster_around_food_terms() {
        let docs = set(vec![
            doc("doc-a", "間餐廳新出咗個menu，啲食物好正，值得一試"),
            doc("doc-b", "呢排成日去餐廳食嘢，個menu有好多新菜式"),
        ]);
        let topics = extract_topics(&docs, 1, 8).unwrap();
        assert_eq!(topics.topics.len(), 1);
        let kws = &topics.topics[0].keywords;
        for expected in ["食", "餐廳", "menu"] {
            assert!(kws.iter().any(|k| k == expected), "missing {expected} in {kws:?}");
        }
        assert_eq!(topics.topics[0].support, vec!["doc-a", "doc-b"]);
    }

    #[test]
    fn single_document_yields_a_single_topic_with_its_top_terms() {
        let docs = set(vec![doc("doc-a", "學coding寫program，日日debug都幾fun")]);
        let topics = extract_topics(&docs, 3, 2).unwrap();
        assert_eq!(topics.topics.len(), 1);
        assert_eq!(topics.topics[0].keywords.len(), 2);
        assert_eq!(topics.topics[0].label, topics.topics[0].keywords[0]);
    }

    #[test]
    fn all_stopword_corpus_is_a_usage_error() {
        let docs = set(vec![doc("doc-a", "the and of 嘅 係 唔")]);
        let err = extract_topics(&docs, 2, 4).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn empty_corpus_is_a_usage_error() {
        assert!(matches!(extract_topics(&set(vec![]), 2, 4), Err(Error::Usage(_))));
    }

    #[test]
    fn distinct_subjects_separate_into_clusters() {
        let docs = set(vec![
            doc("doc-a", "餐廳啲點心好好食，飲茶必去餐廳"),
            doc("doc-b", "新款手機處理器快咗，手機電池都耐用咗"),
            doc("doc-c", "餐廳訂座要早，啲點心賣晒就冇"),
        ]);
        let topics = extract_topics(&docs, 2, 4).unwrap();
        assert_eq!(topics.topics.len(), 2);
        let by_support: BTreeMap<usize, &Topic> =
            topics.topics.iter().map(|t| (t.support.len(), t)).collect();
        assert_eq!(by_support[&2].support, vec!["doc-a", "doc-c"]);
        assert_eq!(by_support[&1].support, vec!["doc-b"]);
    }

    #[test]
    fn keyword_lists_respect_k_and_are_ranked() {
        let docs = set(vec![doc("doc-a", "跑步運動對身體好，跑步使人開心，運動要堅持")]);
        let wide = extract_topics(&docs, 1, 10).unwrap();
        let narrow = extract_topics(&docs, 1, 2).unwrap();
        assert!(narrow.topics[0].keywords.len() <= 2);
        assert_eq!(narrow.topics[0].keywords[..], wide.topics[0].keywords[..2]);
    }

    #[test]
    fn digits_never_become_keywords() {
        let docs = set(vec![doc("doc-a", "買咗 3 部 iphone 15 一共 45000 蚊 iphone")]);
        let topics = extract_topics(&docs, 1, 10).unwrap();
        for kw in &topics.topics[0].keywords {
            assert!(kw.chars().any(|c| !c.is_ascii_digit()), "digit keyword {kw}");
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let docs = set(vec![
            doc("doc-a", "餐廳點心菜式 menu 推介"),
            doc("doc-b", "手機電腦科技 gadget 評測"),
        ]);
        let a = extract_topics(&docs, 2, 5).unwrap();
        let b = extract_topics(&docs, 2, 5).unwrap();
        assert_eq!(a, b);
    }
}
