//! Role-based LLM access: providers, retrying gateway, QA log, thought
//! prompting and cost accounting.

mod cost;
mod gateway;
mod mock;
mod openai;
mod thought;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{compute_cost, PriceTable, Rates, Usd};
pub use gateway::{Gateway, QaLog, RetryPolicy};
pub use mock::{FnProvider, MockProvider, MockStep};
pub use openai::{EndpointConfig, OpenAiProvider};
pub use thought::{extract_answer, wrap_thought, RESPONSE_MARKER, THOUGHT_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmRole {
    /// Long-chain reasoning model: extraction, generation, localization.
    Reasoner,
    /// Fast editing model: dimension fixes, rewrites, applying advice.
    Editor,
}

impl fmt::Display for LlmRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LlmRole::Reasoner => "reasoner",
            LlmRole::Editor => "editor",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        TokenUsage {
            input_tokens,
            output_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        self.input_tokens += o.input_tokens;
        self.output_tokens += o.output_tokens;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub role: LlmRole,
    pub purpose: String,
    pub messages: Vec<Message>,
}

impl ChatRequest {
    /// Concatenated message contents, for matching.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderFailure {
    /// Worth retrying: timeouts, connection errors, 429 and 5xx.
    Transient(String),
    Fatal(String),
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, req: &ChatRequest, timeout: Duration) -> Result<ChatResponse, ProviderFailure>;
}

/// One QA-log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub seq: u64,
    pub role: LlmRole,
    pub purpose: String,
    pub messages: Vec<Message>,
    pub response: String,
    pub usage: TokenUsage,
    pub timestamp: chrono::DateTime<chrono::Utc>,
    /// Transport attempts made, including the successful one.
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider rejected request: {0}")]
    Provider(String),
    #[error("no endpoint configured for {0}")]
    NotConfigured(LlmRole),
    #[error("prompt already contains a thought/response marker")]
    AlreadyWrapped,
}
