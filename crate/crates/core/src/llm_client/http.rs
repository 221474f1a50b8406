//! Blocking client for OpenAI-style `chat/completions` endpoints.
//!
//! Request body: `{"model", "messages": [{"role", "content"}], "temperature",
//! "max_tokens"?}`. The reply text is read from `choices[0].message.content`
//! and token counts from `usage.prompt_tokens` / `usage.completion_tokens`.

use std::io;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::{ChatError, ChatRequest, ChatResponse, ChatService, Usage};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    /// Limit for a whole attempt, connect to last body byte.
    pub timeout: Duration,
    /// Extra attempts after the first one.
    pub retries: u32,
    /// Delay before the first retry; doubled for each later one.
    pub backoff: Duration,
    pub max_concurrency: usize,
}

struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().expect("semaphore lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore lock");
        }
        *free -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpChat {
    cfg: HttpConfig,
    agent: ureq::Agent,
    slots: Semaphore,
}

impl HttpChat {
    pub fn new(cfg: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let slots = Semaphore {
            free: Mutex::new(cfg.max_concurrency.max(1)),
            cv: Condvar::new(),
        };
        HttpChat { cfg, agent, slots }
    }

    fn attempt(&self, body: &Value) -> Result<ChatResponse, ChatError> {
        let mut builder = self.agent.post(&self.cfg.endpoint);
        if let Some(key) = &self.cfg.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = builder.send_json(body).map_err(map_ureq)?;
        let code = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_ureq)?;
        if !(200..300).contains(&code) {
            return Err(ChatError::HttpStatus { code, body: text });
        }
        decode(&text)
    }
}

fn map_ureq(e: ureq::Error) -> ChatError {
    match e {
        ureq::Error::Timeout(_) => ChatError::Timeout { attempts: 1 },
        ureq::Error::Io(io) if matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {
            ChatError::Timeout { attempts: 1 }
        }
        other => ChatError::Transport(other.to_string()),
    }
}

fn decode(text: &str) -> Result<ChatResponse, ChatError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ChatError::Decode(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ChatError::Decode("missing choices[0].message.content".into()))?;
    let count = |key: &str| v.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(ChatResponse {
        content: content.to_string(),
        usage: Usage {
            prompt_tokens: count("prompt_tokens"),
            completion_tokens: count("completion_tokens"),
        },
    })
}

fn retryable(e: &ChatError) -> bool {
    match e {
        ChatError::Timeout { .. } | ChatError::Transport(_) => true,
        ChatError::HttpStatus { code, .. } => *code == 429 || *code >= 500,
        _ => false,
    }
}

impl ChatService for HttpChat {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        let body = serde_json::to_value(req).map_err(|e| ChatError::InvalidRequest(e.to_string()))?;
        let _permit = self.slots.acquire();
        let attempts = self.cfg.retries + 1;
        let mut delay = self.cfg.backoff;
        for attempt in 1..=attempts {
            tracing::debug!(endpoint = %self.cfg.endpoint, attempt, "chat request");
            match self.attempt(&body) {
                Ok(resp) => {
                    tracing::trace!(content = %resp.content, "chat response");
                    return Ok(resp);
                }
                Err(e) if retryable(&e) && attempt < attempts => {
                    tracing::warn!(error = %e, attempt, "chat request failed, retrying");
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                Err(ChatError::Timeout { .. }) => return Err(ChatError::Timeout { attempts: attempt }),
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_completion_shape() {
        let r = decode(r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#)
            .unwrap();
        assert_eq!(r.content, "hi");
        assert_eq!(r.usage.prompt_tokens, 3);
        assert!(matches!(decode("{}"), Err(ChatError::Decode(_))));
        assert!(matches!(decode("not json"), Err(ChatError::Decode(_))));
    }
}
