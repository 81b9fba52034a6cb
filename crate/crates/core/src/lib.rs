//! Evaluation and data generation toolkit for mixed Cantonese/English speech
//! transcripts: normalization, mixed-script tokenization, MER/CER/WER,
//! the FAL composite score, an LLM judge with caching, latency benchmarking,
//! dataset management, and a multi-agent conversation generation pipeline.

pub mod bench;
pub mod chat;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod fal;
pub mod judge;
pub mod madgf;
pub mod metrics;
pub mod report;
pub mod textnorm;

#[cfg(test)]
pub(crate) mod testserver;

pub use error::{Error, Result};

/// Lowercase hex of a byte slice; used for hashes in ids and cache keys.
pub(crate) fn hex_encode(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 digest as lowercase hex.
pub(crate) fn sha256_hex(data: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex_encode(&Sha256::digest(data))
}
