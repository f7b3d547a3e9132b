use std::sync::OnceLock;
use std::time::Duration;

use serde_json::{json, Value};

use crate::http::{self, PostError, RetryPolicy};

use super::{EmbedError, Embedder, EmbeddingVector};

pub const ENV_EMBED_URL: &str = "CPT_EMBED_URL";
pub const ENV_EMBED_KEY: &str = "CPT_EMBED_KEY";
pub const ENV_EMBED_MODEL: &str = "CPT_EMBED_MODEL";

/// Client for an embeddings endpoint (`{"input": [...]}` in,
/// `{"data": [{"embedding": [...]}]}` out). The dimension of the first
/// response is pinned; later responses of another size are protocol errors.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
    dimension: OnceLock<usize>,
}

impl HttpEmbedder {
    pub fn new(url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        Self {
            client: http::client(Duration::from_secs(120)),
            url: url.to_string(),
            api_key,
            model: model.into(),
            retry: RetryPolicy::default(),
            dimension: OnceLock::new(),
        }
    }

    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_EMBED_URL).ok()?;
        let key = std::env::var(ENV_EMBED_KEY).ok();
        let model = std::env::var(ENV_EMBED_MODEL).unwrap_or_else(|_| "default".into());
        Some(Self::new(&url, key, model))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension.get().copied()
    }
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let body = json!({"model": self.model, "input": [text]});
        let v = http::post_json(&self.client, &self.url, self.api_key.as_deref(), &body, self.retry)
            .map_err(|e| match e {
                PostError::Transport { attempts, message } => EmbedError::Transport { attempts, message },
                PostError::Protocol(m) => EmbedError::Protocol(m),
            })?;
        let raw: Vec<f64> = v
            .get("data")
            .and_then(|d| d.get(0))
            .and_then(|d| d.get("embedding"))
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedError::Protocol("response has no data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EmbedError::Protocol("non-numeric embedding value".into())))
            .collect::<Result<_, _>>()?;
        let dim = *self.dimension.get_or_init(|| raw.len());
        if raw.len() != dim {
            return Err(EmbedError::Protocol(format!(
                "embedding dimension changed from {dim} to {}",
                raw.len()
            )));
        }
        EmbeddingVector::from_raw(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::test_server::serve;

    fn body(v: &[f64]) -> String {
        json!({"data": [{"embedding": v}]}).to_string()
    }

    #[test]
    fn normalizes_and_pins_dimension() {
        let server = serve(vec![(200, body(&[3.0, 4.0])), (200, body(&[1.0, 0.0, 0.0]))]);
        let e = HttpEmbedder::new(&server.url, None, "m").with_retry(RetryPolicy {
            attempts: 1,
            base_delay: Duration::from_millis(1),
        });
        let v = e.embed("x").unwrap();
        assert_eq!(v.values(), &[0.6, 0.8]);
        assert_eq!(e.dimension(), Some(2));
        assert!(matches!(e.embed("y"), Err(EmbedError::Protocol(_))));
        let sent: Value = serde_json::from_str(&server.requests.lock().unwrap()[0]).unwrap();
        assert_eq!(sent["input"][0], "x");
    }

    #[test]
    fn empty_text_never_hits_the_wire() {
        let e = HttpEmbedder::new("http://127.0.0.1:9", None, "m");
        assert_eq!(e.embed(""), Err(EmbedError::EmptyText));
    }
}
