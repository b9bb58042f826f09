use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{Backend, Capabilities, GenerationRequest, LlmError};

/// One line of a recorded session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub request_hash: String,
    pub request: GenerationRequest,
    pub response: String,
    pub timestamp: String,
}

/// Serves responses from a recorded session, keyed by request hash.
#[derive(Debug, Default)]
pub struct ReplayBackend {
    responses: HashMap<String, String>,
}

impl ReplayBackend {
    pub fn from_records(records: impl IntoIterator<Item = SessionRecord>) -> Self {
        let responses = records.into_iter().map(|r| (r.request_hash, r.response)).collect();
        ReplayBackend { responses }
    }

    pub fn open(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::from_records(read_session(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

pub fn read_session(path: &Path) -> Result<Vec<SessionRecord>, LlmError> {
    let file = File::open(path).map_err(|e| LlmError::Session(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LlmError::Session(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| LlmError::Session(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

impl Backend for ReplayBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let hash = request.hash();
        self.responses.get(&hash).cloned().ok_or(LlmError::ReplayMiss(hash))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_chat: true, deterministic: true }
    }
}

/// Append-only session writer shared by every recording backend of a run.
#[derive(Debug, Clone)]
pub struct Recorder {
    file: Arc<Mutex<File>>,
}

impl Recorder {
    pub fn create(path: &Path) -> Result<Self, LlmError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| LlmError::Session(format!("{}: {e}", path.display())))?;
        Ok(Recorder { file: Arc::new(Mutex::new(file)) })
    }

    pub fn append(&self, request: &GenerationRequest, response: &str) -> Result<(), LlmError> {
        let rec = SessionRecord {
            request_hash: request.hash(),
            request: request.clone(),
            response: response.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        let mut line = serde_json::to_string(&rec).expect("session record serializes");
        line.push('\n');
        let mut f = self.file.lock().expect("recorder poisoned");
        f.write_all(line.as_bytes()).map_err(|e| LlmError::Session(e.to_string()))
    }
}

/// Forwards to `inner` and records each successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    recorder: Recorder,
}

impl<B: Backend> RecordingBackend<B> {
    pub fn new(inner: B, recorder: Recorder) -> Self {
        RecordingBackend { inner, recorder }
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let response = self.inner.generate(request)?;
        self.recorder.append(request, &response)?;
        Ok(response)
    }

    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ChatMessage, ScriptedBackend};

    #[test]
    fn recorded_session_replays_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let rec = RecordingBackend::new(ScriptedBackend::new(["A\n```cobol\nX\n```", "B"]), Recorder::create(&path).unwrap());
        let r1 = GenerationRequest::new("m", vec![ChatMessage::user("one")]);
        let r2 = GenerationRequest::new("m", vec![ChatMessage::user("two")]);
        let a = rec.generate(&r1).unwrap();
        let b = rec.generate(&r2).unwrap();

        let replay = ReplayBackend::open(&path).unwrap();
        assert_eq!(replay.generate(&r1).unwrap(), a);
        assert_eq!(replay.generate(&r2).unwrap(), b);
        let unseen = GenerationRequest::new("m", vec![ChatMessage::user("three")]);
        assert!(matches!(replay.generate(&unseen), Err(LlmError::ReplayMiss(_))));
    }
}
