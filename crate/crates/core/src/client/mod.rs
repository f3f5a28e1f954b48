//! Chat-completion backends speaking the OpenAI-compatible wire protocol.
//!
//! [`chat_complete`] owns the retry policy; a [`CompletionBackend`] performs
//! exactly one attempt per call. [`OpenAiBackend`] talks HTTP, [`MockBackend`]
//! replays a script and never touches the network.

mod backoff;
mod http;
mod mock;

use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::domain::DEFAULT_MODEL;
use crate::prompting::{ChatMessage, Conversation};

pub use backoff::Backoff;
pub use http::OpenAiBackend;
pub use mock::{mock_backend, MatchRule, MockBackend, MockReply, MockScript};

/// Environment variable holding the API key.
pub const API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq)]
pub struct BackendConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: None,
            model: DEFAULT_MODEL.to_string(),
            temperature: 0.0,
            max_tokens: 2048,
            timeout_secs: 60.0,
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

impl BackendConfig {
    /// Defaults with the API key taken from `OPENAI_API_KEY`, if set.
    pub fn from_env() -> Self {
        Self {
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidConfig(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BackendError::InvalidConfig(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// The request body of one chat-completion call. Field order is fixed, so
/// identical inputs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(conversation: &Conversation, config: &BackendConfig) -> Self {
        Self {
            model: config.model.clone(),
            messages: conversation.messages().to_vec(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    /// Content of the final message, normally the user turn being answered.
    pub fn last_content(&self) -> &str {
        self.messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("authentication failed (HTTP {status}): {body}")]
    Authentication { status: u16, body: String },
    #[error("rate limited (HTTP 429): {0}")]
    RateLimited(String),
    #[error("server error (HTTP {status}): {body}")]
    Server { status: u16, body: String },
    #[error("request rejected (HTTP {status}): {body}")]
    Http { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("giving up after {attempts} attempts: {last}")]
    RetriesExhausted {
        attempts: u32,
        last: Box<BackendError>,
    },
    #[error("mock script exhausted after {0} replies")]
    ScriptExhausted(usize),
    #[error("no mock rule matches the request ending with {0:?}")]
    NoMatchingRule(String),
    #[error("invalid conversation: {0}")]
    InvalidConversation(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

impl BackendError {
    /// Rate limits and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::RateLimited(_) | BackendError::Server { .. }
        )
    }

    /// Maps an HTTP status to its error class; `None` for success codes.
    pub fn from_status(status: u16, body: String) -> Option<BackendError> {
        match status {
            200..=299 => None,
            401 | 403 => Some(BackendError::Authentication { status, body }),
            429 => Some(BackendError::RateLimited(body)),
            500..=599 => Some(BackendError::Server { status, body }),
            _ => Some(BackendError::Http { status, body }),
        }
    }
}

/// A chat-completion endpoint. One call is one attempt; implementations must
/// tolerate concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Submits the conversation and returns the assistant reply, retrying rate
/// limits and server errors with exponential backoff.
pub fn chat_complete(
    backend: &dyn CompletionBackend,
    conversation: &Conversation,
    config: &BackendConfig,
) -> Result<String, BackendError> {
    config.validate()?;
    conversation
        .check_submittable()
        .map_err(BackendError::InvalidConversation)?;
    let request = ChatRequest::new(conversation, config);
    let mut backoff = Backoff::new(config.initial_backoff_ms, config.max_backoff_ms);
    let mut attempts = 0;
    loop {
        attempts += 1;
        match backend.complete(&request) {
            Ok(reply) => return Ok(reply),
            Err(e) if e.is_retryable() => {
                if attempts > config.max_retries {
                    return Err(BackendError::RetriesExhausted {
                        attempts,
                        last: Box::new(e),
                    });
                }
                std::thread::sleep(backoff.next_delay(&mut rand::rng()));
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conversation() -> Conversation {
        let mut c = Conversation::new(ChatMessage::system("sys"));
        c.push(ChatMessage::user("hi"));
        c
    }

    fn fast(retries: u32) -> BackendConfig {
        BackendConfig {
            max_retries: retries,
            initial_backoff_ms: 1,
            max_backoff_ms: 4,
            ..BackendConfig::default()
        }
    }

    #[test]
    fn passes_mock_reply_through() {
        let mock = MockBackend::sequence(["OK"]);
        assert_eq!(
            chat_complete(&mock, &conversation(), &fast(0)).unwrap(),
            "OK"
        );
    }

    #[test]
    fn retries_rate_limits_until_success() {
        let mock = MockBackend::sequence([
            MockReply::status(429),
            MockReply::status(429),
            MockReply::text("done"),
        ]);
        assert_eq!(
            chat_complete(&mock, &conversation(), &fast(3)).unwrap(),
            "done"
        );
        assert_eq!(mock.call_count(), 3);
    }

    #[test]
    fn zero_retries_exhaust_immediately() {
        let mock = MockBackend::sequence([MockReply::status(429), MockReply::text("late")]);
        let err = chat_complete(&mock, &conversation(), &fast(0)).unwrap_err();
        assert!(matches!(
            err,
            BackendError::RetriesExhausted { attempts: 1, .. }
        ));
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn server_errors_retry_but_auth_does_not() {
        let mock = MockBackend::sequence([MockReply::status(503), MockReply::text("up")]);
        assert_eq!(
            chat_complete(&mock, &conversation(), &fast(1)).unwrap(),
            "up"
        );

        let mock = MockBackend::sequence([MockReply::status(401), MockReply::text("never")]);
        let err = chat_complete(&mock, &conversation(), &fast(5)).unwrap_err();
        assert!(matches!(
            err,
            BackendError::Authentication { status: 401, .. }
        ));
        assert_eq!(mock.call_count(), 1);
    }

    #[test]
    fn rejects_conversations_not_ending_in_user() {
        let mut c = conversation();
        c.push(ChatMessage::assistant("a"));
        let mock = MockBackend::sequence(["x"]);
        assert!(matches!(
            chat_complete(&mock, &c, &fast(0)),
            Err(BackendError::InvalidConversation(_))
        ));
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn request_body_is_byte_stable() {
        let config = BackendConfig::default();
        let a = ChatRequest::new(&conversation(), &config).to_json();
        let b = ChatRequest::new(&conversation(), &config).to_json();
        assert_eq!(a, b);
        assert_eq!(
            a,
            r#"{"model":"gpt-3.5-turbo","messages":[{"role":"system","content":"sys"},{"role":"user","content":"hi"}],"temperature":0.0,"max_tokens":2048}"#
        );
    }

    #[test]
    fn config_validation() {
        let bad = BackendConfig {
            temperature: -0.1,
            ..BackendConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BackendConfig {
            timeout_secs: 0.0,
            ..BackendConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn status_classification() {
        assert_eq!(BackendError::from_status(200, String::new()), None);
        assert!(BackendError::from_status(429, String::new())
            .unwrap()
            .is_retryable());
        assert!(BackendError::from_status(502, String::new())
            .unwrap()
            .is_retryable());
        assert!(!BackendError::from_status(400, String::new())
            .unwrap()
            .is_retryable());
        assert!(!BackendError::from_status(403, String::new())
            .unwrap()
            .is_retryable());
    }
}
