use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rust_decimal::Decimal;

use super::{
    compute_cost, ChatExchange, ChatProvider, ChatRequest, LlmError, LlmRole, Message, PriceTable, ProviderFailure,
    TokenUsage,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(300),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            initial_backoff: Duration::ZERO,
            ..Default::default()
        }
    }
}

/// Append-only record of every exchange in a session, optionally mirrored
/// to a JSON-lines file.
#[derive(Debug, Default)]
pub struct QaLog {
    entries: Vec<ChatExchange>,
    sink: Option<PathBuf>,
}

impl QaLog {
    pub fn new() -> Self {
        QaLog::default()
    }

    pub fn persisted(path: &Path) -> Self {
        QaLog {
            entries: Vec::new(),
            sink: Some(path.to_path_buf()),
        }
    }

    fn append(&mut self, mut ex: ChatExchange) {
        ex.seq = self.entries.len() as u64 + 1;
        if let Some(path) = &self.sink {
            let line = serde_json::to_string(&ex).expect("exchange serializes");
            let res = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .and_then(|mut f| writeln!(f, "{line}"));
            if let Err(e) = res {
                log::warn!("cannot append QA log {}: {e}", path.display());
            }
        }
        self.entries.push(ex);
    }

    pub fn entries(&self) -> &[ChatExchange] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn usages(&self) -> impl Iterator<Item = (LlmRole, TokenUsage)> + '_ {
        self.entries.iter().map(|e| (e.role, e.usage))
    }

    pub fn usage_by_role(&self) -> std::collections::BTreeMap<LlmRole, TokenUsage> {
        let mut m = std::collections::BTreeMap::new();
        for (r, u) in self.usages() {
            *m.entry(r).or_default() += u;
        }
        m
    }

    pub fn cost(&self, prices: &PriceTable) -> Decimal {
        compute_cost(self.usages(), prices)
    }

    pub fn read_jsonl(path: &Path) -> std::io::Result<Vec<ChatExchange>> {
        let text = std::fs::read_to_string(path)?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)))
            .collect()
    }
}

/// Routes role-tagged requests to a provider with retries, recording each
/// exchange in the session's QA log. Clones share the provider and log.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    retry: RetryPolicy,
    prices: PriceTable,
    log: Arc<Mutex<QaLog>>,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Gateway {
            provider,
            retry: RetryPolicy::default(),
            prices: PriceTable::default(),
            log: Arc::new(Mutex::new(QaLog::new())),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_prices(mut self, prices: PriceTable) -> Self {
        self.prices = prices;
        self
    }

    pub fn with_log(mut self, log: QaLog) -> Self {
        self.log = Arc::new(Mutex::new(log));
        self
    }

    /// Same provider and settings, fresh QA log.
    pub fn fork(&self, log: QaLog) -> Self {
        self.clone().with_log(log)
    }

    pub fn prices(&self) -> &PriceTable {
        &self.prices
    }

    pub fn log(&self) -> std::sync::MutexGuard<'_, QaLog> {
        self.log.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn total_cost(&self) -> Decimal {
        self.log().cost(&self.prices)
    }

    pub fn complete(
        &self,
        role: LlmRole,
        purpose: &str,
        messages: Vec<Message>,
    ) -> Result<(String, TokenUsage), LlmError> {
        let req = ChatRequest {
            role,
            purpose: purpose.to_string(),
            messages,
        };
        let mut attempts = 0;
        let mut backoff = self.retry.initial_backoff;
        let result = loop {
            attempts += 1;
            match self.provider.complete(&req, self.retry.timeout) {
                Ok(r) => break Ok(r),
                Err(ProviderFailure::Fatal(m)) => break Err(LlmError::Provider(m)),
                Err(ProviderFailure::Transient(m)) => {
                    log::warn!("{role} {purpose}: attempt {attempts} failed: {m}");
                    if attempts >= self.retry.max_attempts.max(1) {
                        break Err(LlmError::Transport { attempts, message: m });
                    }
                    if !backoff.is_zero() {
                        std::thread::sleep(backoff);
                    }
                    backoff *= 2;
                }
            }
        };
        let (response, usage, error) = match &result {
            Ok(r) => (r.text.clone(), r.usage, None),
            Err(e) => (String::new(), TokenUsage::default(), Some(e.to_string())),
        };
        self.log().append(ChatExchange {
            seq: 0,
            role,
            purpose: req.purpose,
            messages: req.messages,
            response,
            usage,
            timestamp: chrono::Utc::now(),
            attempts,
            error,
        });
        result.map(|r| (r.text, r.usage))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockProvider, MockStep};

    fn gw(steps: Vec<MockStep>, attempts: u32) -> Gateway {
        Gateway::new(Arc::new(MockProvider::new(steps))).with_retry(RetryPolicy::immediate(attempts))
    }

    #[test]
    fn ok_response_is_logged() {
        let g = gw(vec![MockStep::reply("ok").usage(10, 2)], 3);
        let (text, usage) = g.complete(LlmRole::Reasoner, "ping", vec![Message::user("hi")]).unwrap();
        assert_eq!(text, "ok");
        assert_eq!(usage, TokenUsage::new(10, 2));
        assert_eq!(g.log().len(), 1);
        assert_eq!(g.log().entries()[0].attempts, 1);
    }

    #[test]
    fn transient_failures_are_retried() {
        let g = gw(vec![MockStep::transient(), MockStep::transient(), MockStep::reply("ok")], 3);
        let (text, _) = g.complete(LlmRole::Editor, "x", vec![]).unwrap();
        assert_eq!(text, "ok");
        assert_eq!(g.log().entries()[0].attempts, 3);
    }

    #[test]
    fn retries_are_bounded() {
        let g = gw(vec![MockStep::transient(), MockStep::transient(), MockStep::reply("late")], 2);
        let err = g.complete(LlmRole::Editor, "x", vec![]).unwrap_err();
        assert_eq!(err, LlmError::Transport { attempts: 2, message: "scripted transient failure".into() });
        let log = g.log();
        assert_eq!(log.entries()[0].attempts, 2);
        assert!(log.entries()[0].error.is_some());
    }

    #[test]
    fn fatal_is_not_retried() {
        let g = gw(vec![MockStep::fatal(), MockStep::reply("never")], 3);
        assert!(matches!(g.complete(LlmRole::Editor, "x", vec![]), Err(LlmError::Provider(_))));
        assert_eq!(g.log().entries()[0].attempts, 1);
    }

    #[test]
    fn persisted_log_round_trips() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("qa_log.jsonl");
        let g = gw(vec![MockStep::reply("a").usage(1, 1), MockStep::reply("b")], 1).with_log(QaLog::persisted(&path));
        g.complete(LlmRole::Reasoner, "p1", vec![Message::user("q1")]).unwrap();
        g.complete(LlmRole::Editor, "p2", vec![Message::user("q2")]).unwrap();
        let back = QaLog::read_jsonl(&path).unwrap();
        assert_eq!(back, g.log().entries());
        assert_eq!(back.iter().map(|e| e.seq).collect::<Vec<_>>(), [1, 2]);
    }
}
