use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ChatProvider, ChatRequest, ChatResponse, LlmRole, ProviderFailure, TokenUsage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedFailure {
    Transient,
    Fatal,
}

/// One scripted reply. Optional matchers check the incoming request; a
/// mismatch is a hard failure so that drifting prompts break tests loudly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockStep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<LlmRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
    #[serde(default)]
    pub response: String,
    #[serde(default)]
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail: Option<ScriptedFailure>,
}

impl MockStep {
    pub fn reply(text: impl Into<String>) -> Self {
        MockStep {
            purpose: None,
            role: None,
            contains: None,
            response: text.into(),
            usage: TokenUsage::default(),
            fail: None,
        }
    }

    pub fn transient() -> Self {
        MockStep {
            fail: Some(ScriptedFailure::Transient),
            ..MockStep::reply("")
        }
    }

    pub fn fatal() -> Self {
        MockStep {
            fail: Some(ScriptedFailure::Fatal),
            ..MockStep::reply("")
        }
    }

    pub fn purpose(mut self, p: &str) -> Self {
        self.purpose = Some(p.to_string());
        self
    }

    pub fn role(mut self, r: LlmRole) -> Self {
        self.role = Some(r);
        self
    }

    pub fn containing(mut self, s: &str) -> Self {
        self.contains = Some(s.to_string());
        self
    }

    pub fn usage(mut self, input: u64, output: u64) -> Self {
        self.usage = TokenUsage::new(input, output);
        self
    }

    fn mismatch(&self, req: &ChatRequest) -> Option<String> {
        if let Some(p) = &self.purpose {
            if *p != req.purpose {
                return Some(format!("expected purpose '{p}', got '{}'", req.purpose));
            }
        }
        if let Some(r) = self.role {
            if r != req.role {
                return Some(format!("expected role {r}, got {}", req.role));
            }
        }
        if let Some(c) = &self.contains {
            if !req.prompt_text().contains(c.as_str()) {
                return Some(format!("prompt for '{}' does not contain '{c}'", req.purpose));
            }
        }
        None
    }
}

/// Replays a script of responses strictly in order.
#[derive(Debug, Default)]
pub struct MockProvider {
    steps: Mutex<VecDeque<MockStep>>,
}

impl MockProvider {
    pub fn new(steps: Vec<MockStep>) -> Self {
        MockProvider {
            steps: Mutex::new(steps.into()),
        }
    }

    /// Script file: a JSON array of steps.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let steps: Vec<MockStep> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(MockProvider::new(steps))
    }

    pub fn push(&self, step: MockStep) {
        self.steps.lock().unwrap_or_else(|p| p.into_inner()).push_back(step);
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().unwrap_or_else(|p| p.into_inner()).len()
    }
}

impl ChatProvider for MockProvider {
    fn complete(&self, req: &ChatRequest, _timeout: Duration) -> Result<ChatResponse, ProviderFailure> {
        let mut steps = self.steps.lock().unwrap_or_else(|p| p.into_inner());
        let Some(step) = steps.pop_front() else {
            return Err(ProviderFailure::Fatal(format!("mock script exhausted at '{}'", req.purpose)));
        };
        if let Some(why) = step.mismatch(req) {
            log::error!("mock script mismatch: {why}");
            return Err(ProviderFailure::Fatal(format!("mock script mismatch: {why}")));
        }
        match step.fail {
            Some(ScriptedFailure::Transient) => Err(ProviderFailure::Transient("scripted transient failure".into())),
            Some(ScriptedFailure::Fatal) => Err(ProviderFailure::Fatal("scripted fatal failure".into())),
            None => Ok(ChatResponse {
                text: step.response,
                usage: step.usage,
            }),
        }
    }
}

/// Provider backed by a closure, for tests that compute replies from the prompt.
pub struct FnProvider<F>(pub F);

impl<F> ChatProvider for FnProvider<F>
where
    F: Fn(&ChatRequest) -> Result<ChatResponse, ProviderFailure> + Send + Sync,
{
    fn complete(&self, req: &ChatRequest, _timeout: Duration) -> Result<ChatResponse, ProviderFailure> {
        (self.0)(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::Message;

    fn req(purpose: &str, text: &str) -> ChatRequest {
        ChatRequest {
            role: LlmRole::Reasoner,
            purpose: purpose.into(),
            messages: vec![Message::user(text)],
        }
    }

    #[test]
    fn matchers_are_enforced() {
        let m = MockProvider::new(vec![
            MockStep::reply("a").purpose("one"),
            MockStep::reply("b").containing("needle"),
            MockStep::reply("c").role(LlmRole::Editor),
        ]);
        let t = Duration::from_secs(1);
        assert_eq!(m.complete(&req("one", ""), t).unwrap().text, "a");
        assert!(matches!(m.complete(&req("two", "hay"), t), Err(ProviderFailure::Fatal(_))));
        assert!(matches!(m.complete(&req("x", ""), t), Err(ProviderFailure::Fatal(_))));
        assert!(matches!(m.complete(&req("x", ""), t), Err(ProviderFailure::Fatal(_))));
        assert_eq!(m.remaining(), 0);
    }

    #[test]
    fn script_file_format() {
        let json = r#"[{"purpose": "p", "response": "r", "usage": {"input_tokens": 3, "output_tokens": 4}},
                       {"fail": "transient"}]"#;
        let steps: Vec<MockStep> = serde_json::from_str(json).unwrap();
        assert_eq!(steps[0].usage, TokenUsage::new(3, 4));
        assert_eq!(steps[1].fail, Some(ScriptedFailure::Transient));
    }
}
