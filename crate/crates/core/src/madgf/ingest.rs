//! Engineer role: pulls raw documents from local directories or URL
//! lists. Per-document failures are recorded, never fatal; only a broken
//! adapter spec aborts.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// Reads every `.txt` / `.md` file in the directory, filename order.
    LocalDir { path: PathBuf },
    /// Fetches each URL listed (one per line) in the file.
    UrlList { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Document {
    pub id: String,
    pub source: String,
    pub text: String,
    /// Unix seconds for fetched documents; local files carry none.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fetched_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestError {
    pub source: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentSet {
    pub documents: Vec<Document>,
    /// Adapter descriptions, one per source spec.
    pub provenance: Vec<String>,
    pub errors: Vec<IngestError>,
}

/// Content-hash id, with an ordinal suffix when the same content shows up
/// again so ids stay unique.
fn assign_id(text: &str, seen: &mut HashMap<String, usize>) -> String {
    let digest = sha256_hex(text.as_bytes());
    let short = &digest[..16];
    let n = seen.entry(short.to_string()).or_insert(0);
    *n += 1;
    if *n == 1 {
        format!("doc-{short}")
    } else {
        format!("doc-{short}-{n}")
    }
}

pub fn ingest(sources: &[SourceSpec]) -> Result<DocumentSet> {
    if sources.is_empty() {
        return Err(Error::Usage("no document sources given".into()));
    }
    let mut documents = Vec::new();
    let mut provenance = Vec::new();
    let mut errors = Vec::new();
    let mut seen = HashMap::new();

    for spec in sources {
        match spec {
            SourceSpec::LocalDir { path } => {
                provenance.push(format!("local_dir:{}", path.display()));
                let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                    .map_err(|e| Error::io(path, e))?
                    .filter_map(|entry| entry.ok().map(|e| e.path()))
                    .filter(|p| {
                        matches!(
                            p.extension().and_then(|e| e.to_str()),
                            Some("txt") | Some("md")
                        )
                    })
                    .collect();
                files.sort();
                for file in files {
                    let source = file.display().to_string();
                    match std::fs::read_to_string(&file) {
                        Err(e) => errors.push(IngestError { source, message: e.to_string() }),
                        Ok(text) if text.trim().is_empty() => errors.push(IngestError {
                            source,
                            message: "document is empty after trimming whitespace".into(),
                        }),
                        Ok(text) => documents.push(Document {
                            id: assign_id(&text, &mut seen),
                            source,
                            text,
                            fetched_at: None,
                        }),
                    }
                }
            }
            SourceSpec::UrlList { path } => {
                provenance.push(format!("url_list:{}", path.display()));
                let listing = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let client = reqwest::blocking::Client::builder()
                    .timeout(Duration::from_secs(30))
                    .build()
                    .map_err(|e| Error::Backend(format!("building http client: {e}")))?;
                for url in listing.lines().map(str::trim).filter(|l| !l.is_empty()) {
                    match fetch(&client, url) {
                        Err(message) => {
                            errors.push(IngestError { source: url.to_string(), message })
                        }
                        Ok(text) if text.trim().is_empty() => errors.push(IngestError {
                            source: url.to_string(),
                            message: "document is empty after trimming whitespace".into(),
                        }),
                        Ok(text) => documents.push(Document {
                            id: assign_id(&text, &mut seen),
                            source: url.to_string(),
                            text,
                            fetched_at: Some(unix_now()),
                        }),
                    }
                }
            }
        }
    }
    Ok(DocumentSet { documents, provenance, errors })
}

fn fetch(client: &reqwest::blocking::Client, url: &str) -> std::result::Result<String, String> {
    let response = client.get(url).send().map_err(|e| e.to_string())?;
    let status = response.status();
    if !status.is_success() {
        return Err(format!("HTTP {status}"));
    }
    response.text().map_err(|e| e.to_string())
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).expect("clock before 1970").as_secs()
}
