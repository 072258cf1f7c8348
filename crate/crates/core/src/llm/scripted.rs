use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::{FinishReason, LlmBackend, LlmConfig, LlmError, LlmReply, LlmRequest};

/// Deterministic stand-in for a model: canned replies looked up by block key,
/// or by prompt hash when no key matches.
///
/// Optional per-key failure queues are drained one error per call before the
/// canned reply is served, which is enough to exercise retry handling.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: HashMap<String, (String, FinishReason)>,
    failures: Mutex<HashMap<String, VecDeque<LlmError>>>,
    calls: AtomicUsize,
    calls_by_key: Mutex<HashMap<String, usize>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reply(mut self, key: impl Into<String>, text: impl Into<String>) -> Self {
        self.replies.insert(key.into(), (text.into(), FinishReason::Complete));
        self
    }

    pub fn with_truncated(mut self, key: impl Into<String>, text: impl Into<String>) -> Self {
        self.replies.insert(key.into(), (text.into(), FinishReason::Truncated));
        self
    }

    pub fn with_failures(self, key: impl Into<String>, errors: Vec<LlmError>) -> Self {
        self.failures.lock().expect("poisoned").insert(key.into(), errors.into());
        self
    }

    /// Reads a JSON object mapping keys (`block-<index>` or `sha256:<hash>`) to replies.
    pub fn from_json(raw: &[u8]) -> Result<Self, LlmError> {
        let map: HashMap<String, String> =
            serde_json::from_slice(raw).map_err(|e| LlmError::Config(format!("scripted replies: {e}")))?;
        Ok(map.into_iter().fold(Self::new(), |b, (k, v)| b.with_reply(k, v)))
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let raw = std::fs::read(path).map_err(|e| LlmError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&raw)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, key: &str) -> usize {
        self.calls_by_key.lock().expect("poisoned").get(key).copied().unwrap_or(0)
    }
}

impl LlmBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn send(&self, request: LlmRequest<'_>, _config: &LlmConfig) -> Result<LlmReply, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        *self.calls_by_key.lock().expect("poisoned").entry(request.key.to_owned()).or_default() += 1;

        if let Some(queue) = self.failures.lock().expect("poisoned").get_mut(request.key) {
            if let Some(err) = queue.pop_front() {
                return Err(err);
            }
        }
        let (text, finish_reason) = self
            .replies
            .get(request.key)
            .or_else(|| self.replies.get(&request.prompt.hash()))
            .ok_or_else(|| LlmError::NoReply(request.key.to_owned()))?;
        Ok(LlmReply { text: text.clone(), finish_reason: *finish_reason, latency: Duration::ZERO })
    }
}
