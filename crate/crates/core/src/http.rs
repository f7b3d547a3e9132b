//! Blocking JSON POST with bounded retries, shared by the chat and embedding clients.

use std::time::Duration;

use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug)]
pub(crate) enum PostError {
    /// Connection failures, timeouts, 429 and 5xx after exhausting retries.
    Transport { attempts: u32, message: String },
    /// Non-retryable status or an unparseable body.
    Protocol(String),
}

pub(crate) fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("HTTP client builds with static configuration")
}

pub(crate) fn post_json(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    policy: RetryPolicy,
) -> Result<Value, PostError> {
    let attempts = policy.attempts.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(policy.base_delay * 2u32.pow(attempt - 1));
        }
        let mut req = client.post(url).json(body);
        if let Some(key) = api_key.filter(|k| !k.is_empty()) {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => {
                last = e.to_string();
                tracing::warn!(attempt = attempt + 1, error = %last, "request failed");
                continue;
            }
        };
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            last = format!("HTTP {status}: {}", resp.text().unwrap_or_default());
            tracing::warn!(attempt = attempt + 1, error = %last, "retryable status");
            continue;
        }
        if !status.is_success() {
            return Err(PostError::Protocol(format!(
                "HTTP {status}: {}",
                resp.text().unwrap_or_default()
            )));
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        return serde_json::from_str(&text)
            .map_err(|e| PostError::Protocol(format!("malformed JSON body: {e}")));
    }
    Err(PostError::Transport {
        attempts,
        message: last,
    })
}
