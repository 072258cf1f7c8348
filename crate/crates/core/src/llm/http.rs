use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{FinishReason, LlmBackend, LlmConfig, LlmError, LlmReply, LlmRequest};

/// OpenAI-compatible chat-completions client (blocking).
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: &LlmConfig) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::Config(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

fn retry_after(value: Option<&reqwest::header::HeaderValue>) -> Option<Duration> {
    let secs: f64 = value?.to_str().ok()?.trim().parse().ok()?;
    (secs.is_finite() && secs >= 0.0).then(|| Duration::from_secs_f64(secs))
}

impl LlmBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn send(&self, request: LlmRequest<'_>, config: &LlmConfig) -> Result<LlmReply, LlmError> {
        let key = config
            .api_key
            .as_ref()
            .ok_or_else(|| LlmError::Authentication(format!("no API key (set {})", super::API_KEY_ENV)))?;
        let body = ChatRequest {
            model: &config.model_name,
            messages: [
                Message { role: "system", content: &request.prompt.system },
                Message { role: "user", content: &request.prompt.user },
            ],
            temperature: config.temperature,
            max_tokens: config.max_output_tokens,
        };

        let started = Instant::now();
        let response = self
            .client
            .post(&config.endpoint_url)
            .bearer_auth(key.expose())
            .json(&body)
            .send()
            .map_err(|e| if e.is_timeout() { LlmError::Timeout } else { LlmError::Transport(e.to_string()) })?;

        let status = response.status();
        let wait = retry_after(response.headers().get(RETRY_AFTER));
        let text = response.text().map_err(|e| {
            if e.is_timeout() {
                LlmError::Timeout
            } else {
                LlmError::Transport(e.to_string())
            }
        })?;

        match status {
            s if s.is_success() => {}
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => return Err(LlmError::Authentication(text)),
            StatusCode::TOO_MANY_REQUESTS => return Err(LlmError::RateLimited { retry_after: wait }),
            StatusCode::REQUEST_TIMEOUT => return Err(LlmError::Timeout),
            s if s.is_server_error() => return Err(LlmError::Server { status: s.as_u16(), body: text }),
            _ => return Err(LlmError::InvalidRequest(format!("{status}: {text}"))),
        }

        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::Provider(format!("unreadable reply: {e}")))?;
        let choice =
            parsed.choices.into_iter().next().ok_or_else(|| LlmError::Provider("reply has no choices".into()))?;
        let finish_reason = match choice.finish_reason.as_deref() {
            Some("length") => FinishReason::Truncated,
            Some("content_filter") => FinishReason::Error,
            _ => FinishReason::Complete,
        };
        Ok(LlmReply { text: choice.message.content.unwrap_or_default(), finish_reason, latency: started.elapsed() })
    }
}
