//! Text normalization and mixed-script tokenization.
//!
//! Normalization runs a fixed pipeline: fullwidth folding, variant-character
//! folding, punctuation stripping, Latin lowercasing, whitespace collapsing.
//! The pipeline is idempotent: normalize(normalize(x)) == normalize(x).
//!
//! Tokenization over normalized text yields one token per CJK character, one
//! per Latin word, and one per ASCII digit run. Everything else is whitespace
//! (a separator) or gets discarded with a tally.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unified Ideographs, Extension A, Extension B, and the compatibility
/// blocks. Covers the characters seen in Cantonese transcripts; other CJK
/// extensions are out of scope.
pub fn is_cjk_char(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0xF900..=0xFAFF
        | 0x2F800..=0x2FA1F)
}

/// CJK punctuation stripped by default, on top of ASCII punctuation.
const CJK_PUNCTUATION: &[char] = &['，', '。', '？', '！', '、', '：', '；', '「', '」', '（', '）'];

/// Default strip set: ASCII punctuation except the apostrophe (kept so
/// contractions like "don't" survive as one word), plus common fullwidth
/// CJK punctuation.
pub fn default_strip_char(c: char) -> bool {
    (c.is_ascii_punctuation() && c != '\'') || CJK_PUNCTUATION.contains(&c)
}

/// Single-codepoint rewrite table for variant characters (simplified forms,
/// regional variants). Chains are resolved at load time so one application
/// reaches the fixpoint; a cycle in the table is a config error.
#[derive(Debug, Clone, Default)]
pub struct VariantTable {
    map: HashMap<char, char>,
}

impl VariantTable {
    /// Parses a TSV file: one `source<TAB>target` pair per line, `#` starts
    /// a comment, blank lines ignored. Both sides must be exactly one
    /// codepoint.
    pub fn from_tsv_path(path: &Path) -> Result<VariantTable> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        VariantTable::from_tsv(&raw).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {}", path.display(), msg)),
            other => other,
        })
    }

    pub fn from_tsv(raw: &str) -> Result<VariantTable> {
        let mut map = HashMap::new();
        for (lineno, line) in raw.lines().enumerate() {
            let line = line.trim_end_matches(['\r']);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (src, dst) = match (fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(d), None) => (s, d),
                _ => {
                    return Err(Error::Config(format!(
                        "variant table line {}: expected exactly two tab-separated fields",
                        lineno + 1
                    )))
                }
            };
            let src = single_char(src, lineno + 1, "source")?;
            let dst = single_char(dst, lineno + 1, "target")?;
            if src == dst {
                return Err(Error::Config(format!(
                    "variant table line {}: source equals target",
                    lineno + 1
                )));
            }
            if map.insert(src, dst).is_some() {
                return Err(Error::Config(format!(
                    "variant table line {}: duplicate source {:?}",
                    lineno + 1,
                    src
                )));
            }
        }
        let map = resolve_chains(map)?;
        Ok(VariantTable { map })
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    fn fold(&self, c: char) -> char {
        self.map.get(&c).copied().unwrap_or(c)
    }
}

fn single_char(field: &str, lineno: usize, side: &str) -> Result<char> {
    let mut chars = field.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(Error::Config(format!(
            "variant table line {}: {} must be exactly one character, got {:?}",
            lineno, side, field
        ))),
    }
}

/// Follows each source through the table until a character with no mapping;
/// a path longer than the table size means a cycle.
fn resolve_chains(map: HashMap<char, char>) -> Result<HashMap<char, char>> {
    let mut resolved = HashMap::with_capacity(map.len());
    for (&src, &first) in &map {
        let mut cur = first;
        let mut steps = 0usize;
        while let Some(&next) = map.get(&cur) {
            steps += 1;
            if steps > map.len() {
                return Err(Error::Config(format!(
                    "variant table contains a cycle involving {:?}",
                    src
                )));
            }
            cur = next;
        }
        resolved.insert(src, cur);
    }
    Ok(resolved)
}

/// Normalization switches. Defaults enable the full pipeline with no
/// variant folding.
#[derive(Debug, Clone)]
pub struct NormConfig {
    pub strip_punctuation: bool,
    pub lowercase_latin: bool,
    pub fold_width: bool,
    pub variant_table: Option<VariantTable>,
}

impl Default for NormConfig {
    fn default() -> NormConfig {
        NormConfig {
            strip_punctuation: true,
            lowercase_latin: true,
            fold_width: true,
            variant_table: None,
        }
    }
}

/// Fullwidth ASCII (U+FF01..=U+FF5E) to its ASCII counterpart; ideographic
/// space to a plain space.
fn fold_width_char(c: char) -> char {
    match c as u32 {
        0xFF01..=0xFF5E => char::from_u32(c as u32 - 0xFEE0).unwrap(),
        0x3000 => ' ',
        _ => c,
    }
}

/// Runs the normalization pipeline. Stripped punctuation becomes a space so
/// it still separates words; runs of whitespace collapse to one space and
/// the ends are trimmed.
pub fn normalize_text(text: &str, cfg: &NormConfig) -> String {
    let mut out = String::with_capacity(text.len());
    for raw in text.chars() {
        let mut c = raw;
        if cfg.fold_width {
            c = fold_width_char(c);
        }
        if let Some(table) = &cfg.variant_table {
            c = table.fold(c);
        }
        if cfg.strip_punctuation && default_strip_char(c) {
            out.push(' ');
            continue;
        }
        if cfg.lowercase_latin && c.is_ascii_uppercase() {
            out.push(c.to_ascii_lowercase());
        } else if cfg.lowercase_latin && c.is_uppercase() {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    let mut collapsed = String::with_capacity(out.len());
    for word in out.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }
    collapsed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    CjkChar,
    LatinWord,
    DigitRun,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TokenKind::CjkChar => "cjk_char",
            TokenKind::LatinWord => "latin_word",
            TokenKind::DigitRun => "digit_run",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn cjk(c: char) -> Token {
        Token { kind: TokenKind::CjkChar, text: c.to_string() }
    }

    pub fn latin(text: impl Into<String>) -> Token {
        Token { kind: TokenKind::LatinWord, text: text.into() }
    }

    pub fn digits(text: impl Into<String>) -> Token {
        Token { kind: TokenKind::DigitRun, text: text.into() }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Tokenization result. `source` is the input as given, `normalized` the
/// text the tokens were actually cut from; `discarded` counts normalized
/// codepoints that belonged to no token class and were not whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TokenSequence {
    pub tokens: Vec<Token>,
    pub source: String,
    pub normalized: String,
    pub discarded: usize,
}

/// Per-script token counts. `ratio_cjk_to_latin` is None when there are no
/// Latin words.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScriptCounts {
    pub cjk_chars: usize,
    pub latin_words: usize,
    pub digit_runs: usize,
    pub ratio_cjk_to_latin: Option<f64>,
}

/// Normalizes and tokenizes. Latin words are maximal `[A-Za-z']+` runs
/// containing at least one letter; runs of apostrophes alone are discarded.
pub fn tokenize(text: &str, cfg: &NormConfig) -> TokenSequence {
    let normalized = normalize_text(text, cfg);
    let mut tokens = Vec::new();
    let mut discarded = 0usize;
    let mut run = String::new();
    let mut run_kind: Option<TokenKind> = None;

    fn flush(
        run: &mut String,
        run_kind: &mut Option<TokenKind>,
        tokens: &mut Vec<Token>,
        discarded: &mut usize,
    ) {
        if run.is_empty() {
            *run_kind = None;
            return;
        }
        match run_kind {
            Some(TokenKind::LatinWord) => {
                if run.chars().any(|c| c.is_ascii_alphabetic()) {
                    tokens.push(Token::latin(run.clone()));
                } else {
                    // apostrophes with no letters around them
                    *discarded += run.chars().count();
                }
            }
            Some(TokenKind::DigitRun) => tokens.push(Token::digits(run.clone())),
            _ => unreachable!("only word and digit runs accumulate"),
        }
        run.clear();
        *run_kind = None;
    }

    for c in normalized.chars() {
        if is_cjk_char(c) {
            flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);
            tokens.push(Token::cjk(c));
        } else if c.is_ascii_alphabetic() || c == '\'' {
            if run_kind != Some(TokenKind::LatinWord) {
                flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);
                run_kind = Some(TokenKind::LatinWord);
            }
            run.push(c);
        } else if c.is_ascii_digit() {
            if run_kind != Some(TokenKind::DigitRun) {
                flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);
                run_kind = Some(TokenKind::DigitRun);
            }
            run.push(c);
        } else if c.is_whitespace() {
            flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);
        } else {
            flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);
            discarded += 1;
        }
    }
    flush(&mut run, &mut run_kind, &mut tokens, &mut discarded);

    TokenSequence { tokens, source: text.to_string(), normalized, discarded }
}

/// True when the text tokenizes to at least one CJK char and one Latin
/// word, the working definition of an intra-sentence code-switch.
pub fn is_mixed_text(text: &str, cfg: &NormConfig) -> bool {
    let tokens = tokenize(text, cfg).tokens;
    tokens.iter().any(|t| t.kind == TokenKind::CjkChar)
        && tokens.iter().any(|t| t.kind == TokenKind::LatinWord)
}

pub fn count_stats(seq: &TokenSequence) -> ScriptCounts {
    let mut cjk_chars = 0usize;
    let mut latin_words = 0usize;
    let mut digit_runs = 0usize;
    for token in &seq.tokens {
        match token.kind {
            TokenKind::CjkChar => cjk_chars += 1,
            TokenKind::LatinWord => latin_words += 1,
            TokenKind::DigitRun => digit_runs += 1,
        }
    }
    let ratio_cjk_to_latin = if latin_words > 0 {
        Some(cjk_chars as f64 / latin_words as f64)
    } else {
        None
    };
    ScriptCounts { cjk_chars, latin_words, digit_runs, ratio_cjk_to_latin }
}
