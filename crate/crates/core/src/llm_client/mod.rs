//! Chat-completion clients behind one trait: an HTTP client for
//! OpenAI-compatible endpoints, local mocks, and a record/replay cassette.
//!
//! This is the only module that performs network I/O.

mod cassette;
mod http;
mod mock;

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cassette::{RecordingChat, ReplayChat};
pub use http::{HttpChat, HttpConfig};
pub use mock::{MockChat, RuleChat, ScriptedChat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChatError {
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("endpoint returned HTTP {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("could not decode response: {0}")]
    Decode(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no recorded response for request {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("cassette error: {0}")]
    Cassette(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

impl ChatRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            model: model.into(),
            messages,
            temperature: 0.0,
            max_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), ChatError> {
        if self.messages.is_empty() {
            return Err(ChatError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ChatError::InvalidRequest(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }

    /// Hex SHA-256 of the request's canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Content of the last user message, or an empty string.
    pub fn last_user(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    #[serde(default)]
    pub usage: Usage,
}

impl ChatResponse {
    pub fn text(content: impl Into<String>) -> Self {
        ChatResponse {
            content: content.into(),
            usage: Usage::default(),
        }
    }
}

/// Anything that answers chat requests. Implementations must be shareable
/// across threads.
pub trait ChatService: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError>;
}

impl<T: ChatService + ?Sized> ChatService for &T {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        (**self).complete(req)
    }
}

impl<T: ChatService + ?Sized> ChatService for Arc<T> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        (**self).complete(req)
    }
}

impl<T: ChatService + ?Sized> ChatService for Box<T> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        (**self).complete(req)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    Live,
    Record,
    Replay,
    #[default]
    Mock,
}

/// Client settings as they appear in a run configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientConfig {
    pub mode: ClientMode,
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub model: String,
    pub timeout_secs: f64,
    pub retries: u32,
    pub max_concurrency: usize,
    pub cassette: Option<PathBuf>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            mode: ClientMode::Mock,
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            api_key_env: "HOUSEPLAN_API_KEY".into(),
            model: "mock".into(),
            timeout_secs: 60.0,
            retries: 2,
            max_concurrency: 4,
            cassette: None,
        }
    }
}

/// Builds the client described by `cfg`. `mock` answers requests in mock
/// mode, and is also the backend that record mode wraps when no endpoint
/// should be contacted (`record_live == false`).
pub fn build_client(
    cfg: &ClientConfig,
    mock: Arc<dyn ChatService>,
    record_live: bool,
) -> Result<Arc<dyn ChatService>, ChatError> {
    let live = || -> Arc<dyn ChatService> {
        Arc::new(HttpChat::new(HttpConfig {
            endpoint: cfg.endpoint.clone(),
            api_key: std::env::var(&cfg.api_key_env).ok(),
            timeout: Duration::from_secs_f64(cfg.timeout_secs.max(0.001)),
            retries: cfg.retries,
            backoff: Duration::from_millis(250),
            max_concurrency: cfg.max_concurrency.max(1),
        }))
    };
    let cassette = || {
        cfg.cassette
            .clone()
            .ok_or_else(|| ChatError::Cassette("no cassette path configured".into()))
    };
    Ok(match cfg.mode {
        ClientMode::Mock => mock,
        ClientMode::Live => live(),
        ClientMode::Replay => Arc::new(ReplayChat::open(&cassette()?)?),
        ClientMode::Record => {
            let inner = if record_live { live() } else { mock };
            Arc::new(RecordingChat::create(&cassette()?, inner)?)
        }
    })
}
