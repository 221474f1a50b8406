//! Cassette files: one JSON object per line, `{"fingerprint": .., "response": ..}`.

use std::collections::{HashMap, VecDeque};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{ChatError, ChatRequest, ChatResponse, ChatService};

#[derive(Serialize, Deserialize)]
struct Entry {
    fingerprint: String,
    response: ChatResponse,
}

/// Forwards to an inner client and appends every exchange to a cassette.
pub struct RecordingChat<S> {
    inner: S,
    file: Mutex<File>,
}

impl<S: ChatService> RecordingChat<S> {
    pub fn create(path: &Path, inner: S) -> Result<Self, ChatError> {
        let file = File::create(path).map_err(|e| ChatError::Cassette(format!("{}: {e}", path.display())))?;
        Ok(RecordingChat {
            inner,
            file: Mutex::new(file),
        })
    }
}

impl<S: ChatService> ChatService for RecordingChat<S> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        let response = self.inner.complete(req)?;
        let entry = Entry {
            fingerprint: req.fingerprint(),
            response: response.clone(),
        };
        let mut line = serde_json::to_string(&entry).map_err(|e| ChatError::Cassette(e.to_string()))?;
        line.push('\n');
        let mut file = self.file.lock().expect("cassette lock");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| ChatError::Cassette(e.to_string()))?;
        Ok(response)
    }
}

/// Serves responses from a cassette. Repeated identical requests receive the
/// recorded responses in order; once those run out the last one repeats.
pub struct ReplayChat {
    entries: Mutex<HashMap<String, VecDeque<ChatResponse>>>,
}

impl ReplayChat {
    pub fn open(path: &Path) -> Result<Self, ChatError> {
        let file = File::open(path).map_err(|e| ChatError::Cassette(format!("{}: {e}", path.display())))?;
        let mut entries: HashMap<String, VecDeque<ChatResponse>> = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| ChatError::Cassette(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: Entry = serde_json::from_str(&line)
                .map_err(|e| ChatError::Cassette(format!("line {}: {e}", i + 1)))?;
            entries.entry(entry.fingerprint).or_default().push_back(entry.response);
        }
        Ok(ReplayChat {
            entries: Mutex::new(entries),
        })
    }
}

impl ChatService for ReplayChat {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ChatError> {
        req.validate()?;
        let fingerprint = req.fingerprint();
        let mut entries = self.entries.lock().expect("replay lock");
        let queue = entries
            .get_mut(&fingerprint)
            .ok_or(ChatError::ReplayMiss { fingerprint })?;
        if queue.len() > 1 {
            Ok(queue.pop_front().expect("nonempty"))
        } else {
            Ok(queue.front().cloned().expect("recorded entries are nonempty"))
        }
    }
}
