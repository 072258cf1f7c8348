//! Chat-completion backends.
//!
//! [`LlmBackend`] is one request attempt against some provider. [`complete`]
//! wraps it with the context-budget precondition, retries with exponential
//! backoff for transient failures, and reply normalization. Three backends
//! ship with the crate:
//!
//! - [`HttpBackend`]: OpenAI-compatible `chat/completions` over HTTP.
//! - [`ScriptedBackend`]: canned replies keyed by block, for offline runs and tests.
//! - [`ReplayBackend`]: replays a transcript recorded by [`Recorder`].

mod http;
mod scripted;
mod transcript;

use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::prompting::ChatPrompt;

pub use http::HttpBackend;
pub use scripted::ScriptedBackend;
pub use transcript::{read_transcript, write_transcript, Recorder, ReplayBackend, TranscriptEntry};

pub const API_KEY_ENV: &str = "BLOCKSPOT_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

/// Longest single backoff sleep.
const MAX_BACKOFF: Duration = Duration::from_secs(30);

/// API key wrapper that never prints its value.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmConfig {
    pub model_name: String,
    pub temperature: f64,
    pub max_context_tokens: u32,
    pub max_output_tokens: u32,
    #[serde(with = "secs")]
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// First backoff delay; doubles after each failed attempt.
    #[serde(with = "secs")]
    pub retry_backoff: Duration,
    pub endpoint_url: String,
    #[serde(skip)]
    pub api_key: Option<ApiKey>,
}

mod secs {
    use std::time::Duration;

    pub fn serialize<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            model_name: DEFAULT_MODEL.to_owned(),
            temperature: 0.0,
            max_context_tokens: 4096,
            max_output_tokens: 512,
            request_timeout: Duration::from_secs(60),
            max_retries: 3,
            retry_backoff: Duration::from_millis(500),
            endpoint_url: DEFAULT_ENDPOINT.to_owned(),
            api_key: None,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(LlmError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.max_output_tokens == 0 || self.max_context_tokens <= self.max_output_tokens {
            return Err(LlmError::Config(format!(
                "need max_context_tokens > max_output_tokens > 0, got {} and {}",
                self.max_context_tokens, self.max_output_tokens
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Complete,
    Truncated,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmReply {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("prompt needs about {needed} tokens but the context allows {available}")]
    ContextOverflow { needed: u64, available: u64 },
    #[error("authentication failed: {0}")]
    Authentication(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
    #[error("server error {status}: {body}")]
    Server { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider error: {0}")]
    Provider(String),
    #[error("reply was truncated")]
    Truncated,
    #[error("empty reply")]
    EmptyReply,
    #[error("no reply available for {0}")]
    NoReply(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Timeout | Self::RateLimited { .. } | Self::Server { .. } | Self::Transport(_))
    }
}

/// One request: the block key (`block-<index>`) and its prompt.
#[derive(Debug, Clone, Copy)]
pub struct LlmRequest<'a> {
    pub key: &'a str,
    pub prompt: &'a ChatPrompt,
}

/// A single attempt against a provider. Implementations keep no per-request
/// state between calls and must tolerate concurrent use.
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn send(&self, request: LlmRequest<'_>, config: &LlmConfig) -> Result<LlmReply, LlmError>;
}

impl<B: LlmBackend + ?Sized> LlmBackend for &B {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn send(&self, request: LlmRequest<'_>, config: &LlmConfig) -> Result<LlmReply, LlmError> {
        (**self).send(request, config)
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn send(&self, request: LlmRequest<'_>, config: &LlmConfig) -> Result<LlmReply, LlmError> {
        (**self).send(request, config)
    }
}

/// Token count estimate: one token per four characters, rounded up.
pub fn estimate_tokens(prompt: &ChatPrompt) -> u64 {
    (prompt.char_count() as u64).div_ceil(4)
}

/// Whether the prompt plus the reserved output budget fits the context window.
pub fn fits_context(prompt: &ChatPrompt, config: &LlmConfig) -> bool {
    estimate_tokens(prompt) + u64::from(config.max_output_tokens) <= u64::from(config.max_context_tokens)
}

fn backoff_delay(config: &LlmConfig, attempt: u32, err: &LlmError) -> Duration {
    if let LlmError::RateLimited { retry_after: Some(d) } = err {
        return (*d).min(MAX_BACKOFF);
    }
    let factor = 2u32.saturating_pow(attempt);
    config.retry_backoff.saturating_mul(factor).min(MAX_BACKOFF)
}

/// Sends the prompt, retrying transient failures up to `max_retries` times.
///
/// The reply text is trimmed. Truncated, failed or empty replies become errors,
/// so `Ok` always carries a complete, non-empty answer.
pub fn complete(
    backend: &dyn LlmBackend,
    key: &str,
    prompt: &ChatPrompt,
    config: &LlmConfig,
) -> Result<LlmReply, LlmError> {
    if !fits_context(prompt, config) {
        return Err(LlmError::ContextOverflow {
            needed: estimate_tokens(prompt) + u64::from(config.max_output_tokens),
            available: config.max_context_tokens.into(),
        });
    }
    let started = Instant::now();
    let mut attempt = 0;
    loop {
        match backend.send(LlmRequest { key, prompt }, config) {
            Ok(reply) => {
                return match reply.finish_reason {
                    FinishReason::Truncated => Err(LlmError::Truncated),
                    FinishReason::Error => Err(LlmError::Provider(reply.text)),
                    FinishReason::Complete => {
                        let text = reply.text.trim().to_owned();
                        if text.is_empty() {
                            Err(LlmError::EmptyReply)
                        } else {
                            Ok(LlmReply { text, finish_reason: FinishReason::Complete, latency: started.elapsed() })
                        }
                    }
                };
            }
            Err(err) if err.is_retryable() && attempt < config.max_retries => {
                let delay = backoff_delay(config, attempt, &err);
                tracing::debug!(backend = backend.name(), key, attempt, ?delay, error = %err, "retrying");
                thread::sleep(delay);
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}
