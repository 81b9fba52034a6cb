//! Chat-completion wire protocol shared by the judge and the conversation
//! generator: one trait, an HTTP client with retry/backoff, and the config
//! shape both backends deserialize from.
//!
//! The auth token is read from an environment variable and never appears in
//! logs, errors, or serialized output.

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A backend that turns a prompt into a text completion. `seed` lets
/// deterministic backends vary output per request; HTTP backends forward it.
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String>;
    /// Stable identifier for provenance fields; must not contain secrets.
    fn identity(&self) -> String;
}

/// Extracts the bodies of `<<<` / `>>>` fenced blocks, the convention all
/// prompt templates use to delimit quoted texts. Mock backends re-read
/// their inputs through this.
pub(crate) fn fenced_sections(prompt: &str) -> Vec<&str> {
    let mut sections = Vec::new();
    let mut rest = prompt;
    while let Some(open) = rest.find("<<<\n") {
        let body = &rest[open + 4..];
        let Some(close) = body.find("\n>>>") else { break };
        sections.push(&body[..close]);
        rest = &body[close + 4..];
    }
    sections
}

/// Backend selection as it appears in config files and CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock {
        #[serde(default)]
        seed: u64,
    },
    #[serde(rename = "http_chat_endpoint", alias = "http")]
    Http {
        endpoint: String,
        model: String,
        #[serde(default = "default_api_key_env")]
        api_key_env: String,
        #[serde(default = "default_timeout_s")]
        timeout_s: f64,
        #[serde(default = "default_max_retries")]
        max_retries: u32,
        #[serde(default = "default_parallelism")]
        parallelism: usize,
    },
}

pub fn default_api_key_env() -> String {
    "JUDGE_API_KEY".into()
}

fn default_timeout_s() -> f64 {
    30.0
}

fn default_max_retries() -> u32 {
    2
}

fn default_parallelism() -> usize {
    1
}

impl BackendConfig {
    pub fn mock(seed: u64) -> BackendConfig {
        BackendConfig::Mock { seed }
    }

    pub fn parallelism(&self) -> usize {
        match self {
            BackendConfig::Mock { .. } => 1,
            BackendConfig::Http { parallelism, .. } => (*parallelism).max(1),
        }
    }
}

/// Holds the token; Debug never reveals it.
struct Secret(String);

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[redacted]")
    }
}

/// Blocking chat-completion client. Retries transport failures and
/// 429/5xx statuses with exponential backoff; other statuses fail fast.
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    token: Secret,
    max_retries: u32,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpChatClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("token", &self.token)
            .finish_non_exhaustive()
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    seed: u64,
    messages: [WireMessage<'a>; 1],
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    content: String,
}

impl HttpChatClient {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key_env: &str,
        timeout_s: f64,
        max_retries: u32,
    ) -> Result<HttpChatClient> {
        let token = std::env::var(api_key_env).map_err(|_| {
            Error::Config(format!("environment variable {api_key_env} is not set"))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(timeout_s.max(0.001)))
            .build()
            .map_err(|e| Error::Backend(format!("failed to build http client: {e}")))?;
        Ok(HttpChatClient {
            endpoint: endpoint.into(),
            model: model.into(),
            token: Secret(token),
            max_retries,
            client,
        })
    }

    pub fn from_config(cfg: &BackendConfig) -> Result<HttpChatClient> {
        match cfg {
            BackendConfig::Http { endpoint, model, api_key_env, timeout_s, max_retries, .. } => {
                HttpChatClient::new(endpoint.clone(), model.clone(), api_key_env, *timeout_s, *max_retries)
            }
            BackendConfig::Mock { .. } => {
                Err(Error::Config("mock backend has no http client".into()))
            }
        }
    }

    fn attempt(&self, prompt: &str, seed: u64) -> std::result::Result<String, (String, bool)> {
        let body = WireRequest {
            model: &self.model,
            temperature: 0.0,
            seed,
            messages: [WireMessage { role: "user", content: prompt }],
        };
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.token.0)
            .json(&body)
            .send()
            .map_err(|e| (scrub(&e.to_string(), &self.token.0), true))?;
        let status = response.status();
        if status == reqwest::StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err((format!("endpoint returned {status}"), true));
        }
        if !status.is_success() {
            return Err((format!("endpoint returned {status}"), false));
        }
        let parsed: WireResponse = response
            .json()
            .map_err(|e| (format!("malformed completion response: {e}"), false))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ("completion response carried no choices".into(), false))
    }
}

/// Belt and braces: reqwest errors echo URLs, not credentials, but any
/// accidental token occurrence is masked before the message escapes.
fn scrub(message: &str, token: &str) -> String {
    if token.is_empty() {
        message.to_string()
    } else {
        message.replace(token, "[redacted]")
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, prompt: &str, seed: u64) -> Result<String> {
        let mut delay = Duration::from_millis(250);
        let mut last = String::new();
        for attempt in 0..=self.max_retries {
            match self.attempt(prompt, seed) {
                Ok(content) => return Ok(content),
                Err((msg, retryable)) => {
                    if !retryable {
                        return Err(Error::Backend(msg));
                    }
                    last = msg;
                    if attempt < self.max_retries {
                        thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(Error::Backend(format!(
            "{} after {} attempts: {last}",
            self.endpoint,
            self.max_retries + 1
        )))
    }

    fn identity(&self) -> String {
        format!("http:{}#{}", self.endpoint, self.model)
    }
}
