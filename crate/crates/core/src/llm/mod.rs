//! Text generation backends and COBOL extraction from model replies.

mod extract;
mod remote;
mod replay;
mod scripted;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_parts;

pub use extract::{extract_cobol, Extraction};
pub use remote::{RemoteBackend, RetryPolicy, API_KEY_ENV, DEFAULT_ENDPOINT, DEFAULT_MAX_IN_FLIGHT};
pub use replay::{read_session, Recorder, RecordingBackend, ReplayBackend, SessionRecord};
pub use scripted::ScriptedBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    /// Zero for every evaluation run.
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl GenerationRequest {
    pub fn new(model_name: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        GenerationRequest {
            model_name: model_name.into(),
            messages,
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!("temperature {} must be >= 0", self.temperature)));
        }
        if self.max_output_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_output_tokens must be positive".into()));
        }
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        Ok(())
    }

    /// Stable digest of model name, messages and temperature. The output
    /// token limit is not part of the identity.
    pub fn hash(&self) -> String {
        let messages = serde_json::to_string(&self.messages).expect("messages serialize");
        let temperature = serde_json::to_string(&self.temperature).expect("f64 serializes");
        sha256_parts(&[&self.model_name, &messages, &temperature])
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("missing credential: set {0}")]
    MissingCredential(&'static str),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unexpected response: {0}")]
    BadResponse(String),
    #[error("session file error: {0}")]
    Session(String),
}

impl LlmError {
    /// Transport failures and rate limiting may succeed on retry.
    pub fn is_retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::RateLimited(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub supports_chat: bool,
    pub deterministic: bool,
}

pub trait Backend: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError>;
    fn capabilities(&self) -> Capabilities;
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        (**self).generate(request)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        (**self).generate(request)
    }
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }
}

/// Validates the request, then asks the backend.
pub fn generate(backend: &dyn Backend, request: &GenerationRequest) -> Result<String, LlmError> {
    request.validate()?;
    backend.generate(request)
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_token_limit_but_not_temperature() {
        let a = GenerationRequest::new("m", vec![ChatMessage::user("hi")]);
        let mut b = a.clone();
        b.max_output_tokens = 7;
        assert_eq!(a.hash(), b.hash());
        b.temperature = 0.5;
        assert_ne!(a.hash(), b.hash());
        let mut c = a.clone();
        c.messages[0].content.push(' ');
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let mut r = GenerationRequest::new("m", vec![ChatMessage::user("hi")]);
        r.temperature = -0.1;
        assert!(matches!(r.validate(), Err(LlmError::InvalidRequest(_))));
    }
}
