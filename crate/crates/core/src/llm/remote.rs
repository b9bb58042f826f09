use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Serialize;
use serde_json::Value;
use tracing::{debug, warn};

use super::{Backend, Capabilities, ChatMessage, GenerationRequest, LlmError};

pub const API_KEY_ENV: &str = "COBOLASSIST_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
const REQUEST_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Wait before each retry; its length is the retry count.
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { backoff: [1, 2, 4].into_iter().map(Duration::from_secs).collect() }
    }
}

impl RetryPolicy {
    pub fn immediate(retries: usize) -> Self {
        RetryPolicy { backoff: vec![Duration::ZERO; retries] }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter poisoned");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter poisoned");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter poisoned") -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug)]
pub struct RemoteBackend {
    endpoint: String,
    api_key: String,
    client: reqwest::blocking::Client,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(RemoteBackend {
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            client,
            retry: RetryPolicy::default(),
            limiter: Limiter { in_flight: Mutex::new(0), freed: Condvar::new(), max: DEFAULT_MAX_IN_FLIGHT },
        })
    }

    /// Reads the credential from the environment only.
    pub fn from_env(endpoint: impl Into<String>) -> Result<Self, LlmError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.is_empty() => Self::new(endpoint, key),
            _ => Err(LlmError::MissingCredential(API_KEY_ENV)),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, max: usize) -> Self {
        self.limiter.max = max.max(1);
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &[u8]) -> Result<String, LlmError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_vec())
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => parse_reply(&text),
            401 | 403 => Err(LlmError::Auth(format!("HTTP {status}"))),
            429 => Err(LlmError::RateLimited(format!("HTTP {status}"))),
            500..=599 => Err(LlmError::Transport(format!("HTTP {status}"))),
            _ => Err(LlmError::BadResponse(format!("HTTP {status}: {}", truncate(&text, 200)))),
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn parse_reply(text: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LlmError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
}

impl Backend for RemoteBackend {
    fn generate(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        // Serialized once so every retry sends identical bytes.
        let body = serde_json::to_vec(&WireRequest {
            model: &request.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        })
        .expect("request serializes");
        let _permit = self.limiter.acquire();
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(text) => {
                    debug!(attempt, "generation succeeded");
                    return Ok(text);
                }
                Err(e) if e.is_retryable() && attempt < self.retry.backoff.len() => {
                    let wait = self.retry.backoff[attempt];
                    warn!(error = %e, attempt, ?wait, "retrying generation");
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { supports_chat: true, deterministic: false }
    }
}
