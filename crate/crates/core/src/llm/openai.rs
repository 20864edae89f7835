use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ChatProvider, ChatRequest, ChatResponse, LlmRole, ProviderFailure, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL up to and excluding `/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

fn default_key_env() -> String {
    "LLM_API_KEY".into()
}

impl EndpointConfig {
    pub fn deepseek_reasoner() -> Self {
        EndpointConfig {
            base_url: "https://api.deepseek.com/v1".into(),
            model: "deepseek-reasoner".into(),
            api_key_env: "DEEPSEEK_API_KEY".into(),
            temperature: None,
            max_tokens: None,
        }
    }

    pub fn deepseek_editor() -> Self {
        EndpointConfig {
            base_url: "https://api.deepseek.com/v1".into(),
            model: "deepseek-chat".into(),
            api_key_env: "DEEPSEEK_API_KEY".into(),
            temperature: Some(0.0),
            max_tokens: None,
        }
    }
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Client for OpenAI-compatible `/chat/completions` endpoints, one per role.
pub struct OpenAiProvider {
    reasoner: EndpointConfig,
    editor: EndpointConfig,
    client: reqwest::blocking::Client,
}

impl OpenAiProvider {
    pub fn new(reasoner: EndpointConfig, editor: EndpointConfig) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| format!("cannot build HTTP client: {e}"))?;
        Ok(OpenAiProvider {
            reasoner,
            editor,
            client,
        })
    }

    fn endpoint(&self, role: LlmRole) -> &EndpointConfig {
        match role {
            LlmRole::Reasoner => &self.reasoner,
            LlmRole::Editor => &self.editor,
        }
    }

    pub(crate) fn request_body(cfg: &EndpointConfig, req: &ChatRequest) -> serde_json::Value {
        let mut body = json!({
            "model": cfg.model,
            "messages": req.messages,
            "stream": false,
        });
        if let Some(t) = cfg.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = cfg.max_tokens {
            body["max_tokens"] = json!(m);
        }
        body
    }

    pub(crate) fn parse_body(text: &str) -> Result<ChatResponse, ProviderFailure> {
        let c: Completion =
            serde_json::from_str(text).map_err(|e| ProviderFailure::Fatal(format!("malformed completion: {e}")))?;
        let content = c
            .choices
            .into_iter()
            .next()
            .and_then(|ch| ch.message.content)
            .ok_or_else(|| ProviderFailure::Fatal("completion has no message content".into()))?;
        let usage = c
            .usage
            .map(|u| TokenUsage::new(u.prompt_tokens, u.completion_tokens))
            .unwrap_or_default();
        Ok(ChatResponse { text: content, usage })
    }
}

impl ChatProvider for OpenAiProvider {
    fn complete(&self, req: &ChatRequest, timeout: Duration) -> Result<ChatResponse, ProviderFailure> {
        let cfg = self.endpoint(req.role);
        let key = std::env::var(&cfg.api_key_env)
            .map_err(|_| ProviderFailure::Fatal(format!("environment variable {} is not set", cfg.api_key_env)))?;
        let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        let resp = self
            .client
            .post(&url)
            .bearer_auth(key)
            .timeout(timeout)
            .json(&Self::request_body(cfg, req))
            .send()
            .map_err(|e| ProviderFailure::Transient(format!("{url}: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| ProviderFailure::Transient(format!("{url}: reading body: {e}")))?;
        if status.is_success() {
            return Self::parse_body(&text);
        }
        let msg = format!("{url}: HTTP {status}: {}", text.chars().take(300).collect::<String>());
        if status.as_u16() == 429 || status.is_server_error() {
            Err(ProviderFailure::Transient(msg))
        } else {
            Err(ProviderFailure::Fatal(msg))
        }
    }
}
