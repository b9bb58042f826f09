use std::collections::VecDeque;
use std::sync::Mutex;

use super::{Backend, Capabilities, GenerationRequest, LlmError};

/// Returns canned responses in order and remembers every request it saw.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    responses: Mutex<VecDeque<String>>,
    seen: Mutex<Vec<GenerationRequest>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<GenerationRequest> {
        self.seen.lock().expect("scripted backend poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("scripted backend poisoned").len()
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.seen.lock().expect("scripted backend poisoned").push(request.clone());
        self.responses
            .lock()
            .expect("scripted backend poisoned")
            .pop_front()
            .ok_or(LlmError::ScriptExhausted)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_chat: true, deterministic: true }
    }
}
