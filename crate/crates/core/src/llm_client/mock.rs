use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use super::{ChatError, ChatRequest, ChatResponse, ChatService};

/// Canned responses keyed by request fingerprint.
#[derive(Debug, Default)]
pub struct MockChat {
    table: HashMap<String, ChatResponse>,
}

impl MockChat {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, req: &ChatRequest, response: impl Into<String>) -> Self {
        self.table.insert(req.fingerprint(), ChatResponse::text(response));
        self
    }
}

impl ChatService for MockChat {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        let fingerprint = req.fingerprint();
        self.table
            .get(&fingerprint)
            .cloned()
            .ok_or(ChatError::ReplayMiss { fingerprint })
    }
}

type Rule = dyn Fn(&ChatRequest) -> Result<String, ChatError> + Send + Sync;

/// Answers every request by calling a function.
pub struct RuleChat {
    rule: Box<Rule>,
}

impl RuleChat {
    pub fn new(rule: impl Fn(&ChatRequest) -> Result<String, ChatError> + Send + Sync + 'static) -> Self {
        RuleChat { rule: Box::new(rule) }
    }
}

impl ChatService for RuleChat {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        (self.rule)(req).map(ChatResponse::text)
    }
}

/// Returns the scripted responses in order, regardless of the request.
#[derive(Debug, Default)]
pub struct ScriptedChat {
    queue: Mutex<VecDeque<String>>,
    calls: Mutex<usize>,
}

impl ScriptedChat {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        ScriptedChat {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
            calls: Mutex::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().expect("lock")
    }
}

impl ChatService for ScriptedChat {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        *self.calls.lock().expect("lock") += 1;
        self.queue
            .lock()
            .expect("lock")
            .pop_front()
            .map(ChatResponse::text)
            .ok_or_else(|| ChatError::Transport("script exhausted".into()))
    }
}
