//! LLM backends: a scripted table for reproducible runs and a
//! chat-completions HTTP client for live models.

use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Decode(String),
    #[error("no scripted response matches the request")]
    NoMatch,
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl LlmRequest {
    pub fn new(system: &str, user: String) -> Self {
        LlmRequest {
            messages: vec![
                Message {
                    role: Role::System,
                    content: system.to_string(),
                },
                Message {
                    role: Role::User,
                    content: user,
                },
            ],
            temperature: 0.0,
            max_tokens: 1024,
            seed: None,
        }
    }

    /// All message contents joined by newlines; what scripted matchers see.
    pub fn flat_text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect::<Vec<_>>().join("\n")
    }
}

pub trait LlmBackend: Send + Sync {
    fn id(&self) -> &str;
    fn deterministic(&self) -> bool;
    fn complete(&self, req: &LlmRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Substring to look for, or a regular expression when prefixed `re:`.
    #[serde(rename = "match")]
    pub matcher: String,
    pub response: String,
}

#[derive(Debug, Clone)]
enum Matcher {
    Substring(String),
    Pattern(Regex),
}

impl Matcher {
    fn matches(&self, text: &str) -> bool {
        match self {
            Matcher::Substring(s) => text.contains(s.as_str()),
            Matcher::Pattern(r) => r.is_match(text),
        }
    }
}

/// Ordered (matcher, response) table; the first matching entry answers.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    id: String,
    entries: Vec<(Matcher, String)>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, BackendError> {
        let entries = entries
            .into_iter()
            .map(|e| {
                let m = match e.matcher.strip_prefix("re:") {
                    Some(p) => Matcher::Pattern(
                        Regex::new(p).map_err(|err| BackendError::Config(format!("bad pattern {p:?}: {err}")))?,
                    ),
                    None => Matcher::Substring(e.matcher),
                };
                Ok((m, e.response))
            })
            .collect::<Result<_, BackendError>>()?;
        Ok(ScriptedBackend {
            id: "scripted".into(),
            entries,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| BackendError::Config(format!("script fixture: {e}")))?;
        Self::new(entries)
    }

    /// A backend that answers every request with `response`.
    pub fn constant(response: &str) -> Self {
        Self::new(vec![ScriptEntry {
            matcher: String::new(),
            response: response.into(),
        }])
        .expect("substring matcher")
    }
}

impl LlmBackend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn complete(&self, req: &LlmRequest) -> Result<String, BackendError> {
        let text = req.flat_text();
        self.entries
            .iter()
            .find(|(m, _)| m.matches(&text))
            .map(|(_, r)| r.clone())
            .ok_or(BackendError::NoMatch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_token_env() -> String {
    "OPTIAGENT_LLM_TOKEN".into()
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

/// Chat-completions client. Transport failures are retried; HTTP error
/// statuses are not.
pub struct HttpBackend {
    cfg: HttpBackendConfig,
    client: reqwest::blocking::Client,
    token: Option<String>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(cfg: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let token = std::env::var(&cfg.token_env).ok().filter(|t| !t.is_empty());
        Ok(HttpBackend { cfg, client, token })
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, BackendError> {
        let mut rb = self.client.post(&self.cfg.url).json(body);
        if let Some(t) = &self.token {
            rb = rb.bearer_auth(t);
        }
        let resp = rb.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: text.chars().take(512).collect(),
            });
        }
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| BackendError::Decode(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Decode("empty choices".into()))
    }
}

impl LlmBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.cfg.model
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn complete(&self, req: &LlmRequest) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &self.cfg.model,
            messages: &req.messages,
            temperature: req.temperature,
            max_tokens: req.max_tokens,
            seed: req.seed,
        };
        let mut last = None;
        for attempt in 0..=self.cfg.retries {
            match self.attempt(&body) {
                Err(BackendError::Transport(e)) => {
                    tracing::warn!(attempt, error = %e, "backend transport failure");
                    last = Some(BackendError::Transport(e));
                }
                other => return other,
            }
        }
        Err(last.unwrap_or(BackendError::Transport("no attempt made".into())))
    }
}
