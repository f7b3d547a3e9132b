//! Chat-completions (HTTP + JSON) client.

use std::time::Duration;

use serde_json::{json, Value};

use crate::config::TopK;
use crate::http::{self, PostError, RetryPolicy};

use super::{BackendError, ChatBackend, ChatRequest, GenerationChunk, Usage};

pub const ENV_BASE_URL: &str = "CPT_API_BASE";
pub const ENV_API_KEY: &str = "CPT_API_KEY";
pub const ENV_MODEL: &str = "CPT_MODEL";

/// Client for any server exposing `POST {base}/chat/completions`.
///
/// When the prompt ends with an assistant message it is sent as a
/// continuation prefix (`continue_final_message`), so the model resumes the
/// branch's private trace instead of starting a new turn.
pub struct HttpChatBackend {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
}

impl HttpChatBackend {
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        let base = base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        };
        Self {
            client: http::client(Duration::from_secs(3600)),
            url,
            api_key,
            model: model.into(),
            retry: RetryPolicy::default(),
        }
    }

    /// `CPT_API_BASE` (required), `CPT_API_KEY`, `CPT_MODEL` (default `default`).
    pub fn from_env() -> Option<Self> {
        let base = std::env::var(ENV_BASE_URL).ok()?;
        let key = std::env::var(ENV_API_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into());
        Some(Self::new(&base, key, model))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn body(&self, req: &ChatRequest<'_>) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": req.context.messages,
            "max_tokens": req.budget_tokens,
            "temperature": req.sampling.temperature,
            "top_p": req.sampling.top_p,
            "n": 1,
            "stream": false,
        });
        if let TopK::Limited(k) = req.sampling.top_k {
            body["top_k"] = json!(k);
        }
        if req.context.ends_with_assistant() {
            body["continue_final_message"] = json!(true);
            body["add_generation_prompt"] = json!(false);
        }
        body
    }
}

/// Decode a chat-completions response body.
pub(crate) fn parse_response(v: &Value) -> Result<GenerationChunk, BackendError> {
    let proto = |m: &str| BackendError::Protocol(m.to_string());
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| proto("response has no choices"))?;
    let text = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .map(|c| c.as_str().unwrap_or_default().to_string())
        .or_else(|| choice.get("text").and_then(Value::as_str).map(str::to_string))
        .ok_or_else(|| proto("choice has no message content"))?;
    let usage = v.get("usage").ok_or_else(|| proto("response has no usage"))?;
    let field = |name: &str| {
        usage
            .get(name)
            .and_then(Value::as_u64)
            .ok_or_else(|| BackendError::Protocol(format!("usage.{name} missing")))
    };
    let usage = Usage {
        prompt_tokens: field("prompt_tokens")?,
        completion_tokens: field("completion_tokens")?,
    };
    let hit_eos = matches!(
        choice.get("finish_reason").and_then(Value::as_str),
        Some("stop") | Some("eos")
    );
    Ok(GenerationChunk {
        text,
        token_count: usage.completion_tokens,
        hit_eos,
        usage,
    })
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<GenerationChunk, BackendError> {
        let body = self.body(req);
        let value = http::post_json(&self.client, &self.url, self.api_key.as_deref(), &body, self.retry)
            .map_err(|e| match e {
                PostError::Transport { attempts, message } => BackendError::Transport { attempts, message },
                PostError::Protocol(m) => BackendError::Protocol(m),
            })?;
        parse_response(&value)
    }
}
