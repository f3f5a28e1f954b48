//! A scripted backend for offline runs and tests.
//!
//! Two modes: a *sequence* replays replies in call order and fails once it
//! runs out; a *matcher* picks the reply of the most specific rule whose
//! substrings occur in the request, independent of call order.
//!
//! Script files are JSON:
//!
//! ```json
//! {"replies": ["first reply", {"status": 429}, {"text": "third"}]}
//! {"rules": [{"contains": ["Peru is nice"], "last_contains": "entity LOC", "reply": "..."}]}
//! ```

use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, ChatRequest, CompletionBackend};
use crate::prompting::Role;

/// One scripted outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockReply {
    Text(String),
    Wrapped { text: String },
    Status { status: u16 },
    Timeout { timeout: bool },
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        MockReply::Text(text.into())
    }

    pub fn status(status: u16) -> Self {
        MockReply::Status { status }
    }

    fn outcome(&self) -> Result<String, BackendError> {
        match self {
            MockReply::Text(t) | MockReply::Wrapped { text: t } => Ok(t.clone()),
            MockReply::Status { status } => Err(BackendError::from_status(
                *status,
                format!("scripted HTTP {status}"),
            )
            .unwrap_or_else(|| {
                BackendError::MalformedResponse(format!("scripted status {status} has no body"))
            })),
            MockReply::Timeout { .. } => Err(BackendError::Timeout),
        }
    }
}

impl From<&str> for MockReply {
    fn from(s: &str) -> Self {
        MockReply::Text(s.to_string())
    }
}

impl From<String> for MockReply {
    fn from(s: String) -> Self {
        MockReply::Text(s)
    }
}

/// A matcher-mode rule. Every `contains` needle must occur in some user
/// message; `last_contains` must occur in the final message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchRule {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_contains: Option<String>,
    pub reply: MockReply,
}

impl MatchRule {
    pub fn new(reply: impl Into<MockReply>) -> Self {
        Self {
            contains: Vec::new(),
            last_contains: None,
            reply: reply.into(),
        }
    }

    pub fn contains(mut self, needle: impl Into<String>) -> Self {
        self.contains.push(needle.into());
        self
    }

    pub fn last_contains(mut self, needle: impl Into<String>) -> Self {
        self.last_contains = Some(needle.into());
        self
    }

    /// Total needle length when the rule matches; longer means more specific.
    fn score(&self, user_text: &str, last: &str) -> Option<usize> {
        let mut score = 0;
        for needle in &self.contains {
            if !user_text.contains(needle.as_str()) {
                return None;
            }
            score += needle.chars().count();
        }
        if let Some(needle) = &self.last_contains {
            if !last.contains(needle.as_str()) {
                return None;
            }
            score += needle.chars().count();
        }
        Some(score)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockScript {
    Sequence { replies: Vec<MockReply> },
    Matcher { rules: Vec<MatchRule> },
}

impl MockScript {
    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        serde_json::from_str(json)
            .map_err(|e| BackendError::InvalidConfig(format!("invalid mock script: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mock script serializes")
    }
}

/// Builds a mock backend, rejecting an empty sequence script.
pub fn mock_backend(script: MockScript) -> Result<MockBackend, BackendError> {
    if let MockScript::Sequence { replies } = &script {
        if replies.is_empty() {
            return Err(BackendError::InvalidConfig(
                "a sequence script needs at least one reply".into(),
            ));
        }
    }
    Ok(MockBackend::from_script(script))
}

#[derive(Debug)]
pub struct MockBackend {
    script: MockScript,
    state: Mutex<MockState>,
}

#[derive(Debug, Default)]
struct MockState {
    cursor: usize,
    calls: Vec<ChatRequest>,
}

impl MockBackend {
    pub fn from_script(script: MockScript) -> Self {
        Self {
            script,
            state: Mutex::new(MockState::default()),
        }
    }

    pub fn sequence<I, R>(replies: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<MockReply>,
    {
        Self::from_script(MockScript::Sequence {
            replies: replies.into_iter().map(Into::into).collect(),
        })
    }

    pub fn matcher(rules: Vec<MatchRule>) -> Self {
        Self::from_script(MockScript::Matcher { rules })
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| {
            BackendError::InvalidConfig(format!("cannot read mock script {}: {e}", path.display()))
        })?;
        mock_backend(MockScript::from_json(&json)?)
    }

    /// Every request received so far, in arrival order.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.state
            .lock()
            .expect("mock state poisoned")
            .calls
            .clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().expect("mock state poisoned").calls.len()
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut state = self.state.lock().expect("mock state poisoned");
        state.calls.push(request.clone());
        match &self.script {
            MockScript::Sequence { replies } => {
                let reply = replies
                    .get(state.cursor)
                    .ok_or(BackendError::ScriptExhausted(replies.len()))?;
                state.cursor += 1;
                reply.outcome()
            }
            MockScript::Matcher { rules } => {
                drop(state);
                let user_text = request
                    .messages
                    .iter()
                    .filter(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .collect::<Vec<_>>()
                    .join("\n");
                let last = request.last_content();
                let mut best: Option<(usize, &MatchRule)> = None;
                for rule in rules {
                    if let Some(score) = rule.score(&user_text, last) {
                        if best.is_none_or(|(s, _)| score > s) {
                            best = Some((score, rule));
                        }
                    }
                }
                match best {
                    Some((_, rule)) => rule.reply.outcome(),
                    None => {
                        let tail: String = last
                            .chars()
                            .rev()
                            .take(60)
                            .collect::<Vec<_>>()
                            .into_iter()
                            .rev()
                            .collect();
                        Err(BackendError::NoMatchingRule(tail))
                    }
                }
            }
        }
    }
}
