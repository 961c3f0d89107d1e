//! Client for OpenAI-compatible `/chat/completions` and `/embeddings`.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::PairKey;
use crate::providers::rate::{Clock, SystemClock};
use crate::providers::{Completion, MessageProvider, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL without the trailing endpoint, e.g. `https://host/v1`.
    pub base_url: String,
    pub chat_model: String,
    pub embedding_model: String,
    /// Width of the embedding endpoint's vectors, if known.
    pub embedding_dim: Option<usize>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_tokens: u32,
    pub temperature: f64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            chat_model: "qwen-turbo".into(),
            embedding_model: "text-embedding-v3".into(),
            embedding_dim: None,
            api_key_env: "LEMP_API_KEY".into(),
            timeout_secs: 60,
            max_tokens: 400,
            temperature: 0.0,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay_ms: 500 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, failed_attempts: u32) -> Duration {
        Duration::from_millis(self.base_delay_ms.saturating_mul(1 << failed_attempts.saturating_sub(1).min(16)))
    }
}

enum Failure {
    Transient(String),
    Fatal(String),
}

/// Runs `op` up to `policy.attempts` times, sleeping with exponential
/// backoff between transient failures.
fn with_retry<T>(policy: &RetryPolicy, clock: &dyn Clock, mut op: impl FnMut() -> Result<T, Failure>) -> Result<T> {
    let attempts = policy.attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        match op() {
            Ok(v) => return Ok(v),
            Err(Failure::Fatal(message)) => return Err(Error::Provider { attempts: attempt, message }),
            Err(Failure::Transient(message)) => {
                log::warn!("provider attempt {attempt}/{attempts} failed: {message}");
                last = message;
                if attempt < attempts {
                    clock.sleep(policy.delay(attempt));
                }
            }
        }
    }
    Err(Error::Provider { attempts, message: last })
}

pub struct HttpProvider {
    config: HttpConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("config", &self.config).finish_non_exhaustive()
    }
}

impl HttpProvider {
    /// Reads the API key from `config.api_key_env`; a missing key sends no
    /// `Authorization` header.
    pub fn new(config: HttpConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_clock(config, api_key, Arc::new(SystemClock::default()))
    }

    /// Explicit key and clock; the clock only drives backoff sleeps.
    pub fn with_clock(config: HttpConfig, api_key: Option<String>, clock: Arc<dyn Clock>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Provider { attempts: 0, message: e.to_string() })?;
        Ok(Self { config, api_key, client, clock })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn post(&self, endpoint: &str, body: &Value) -> Result<Value, Failure> {
        let url = format!("{}/{}", self.config.base_url.trim_end_matches('/'), endpoint);
        let mut req = self.client.post(&url).json(body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req.send().map_err(|e| Failure::Transient(format!("{url}: {e}")))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Transient(format!("{url}: reading body: {e}")))?;
        if status.is_success() {
            serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("{url}: invalid JSON: {e}")))
        } else if status.as_u16() == 429 || status.is_server_error() {
            Err(Failure::Transient(format!("{url}: HTTP {status}: {}", truncate(&text))))
        } else {
            Err(Failure::Fatal(format!("{url}: HTTP {status}: {}", truncate(&text))))
        }
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn parse_chat(v: &Value) -> Result<Completion, Failure> {
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| Failure::Fatal("chat response lacks choices[0].message.content".into()))?
        .to_string();
    let usage = TokenUsage {
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(Completion { text, usage })
}

fn parse_embedding(v: &Value) -> Result<Vec<f32>, Failure> {
    let arr = v["data"][0]["embedding"]
        .as_array()
        .ok_or_else(|| Failure::Fatal("embedding response lacks data[0].embedding".into()))?;
    arr.iter()
        .map(|x| x.as_f64().map(|f| f as f32).ok_or_else(|| Failure::Fatal("non-numeric embedding entry".into())))
        .collect()
}

impl MessageProvider for HttpProvider {
    fn model_id(&self) -> &str {
        &self.config.chat_model
    }

    fn analyze(&self, _key: PairKey, prompt: &str) -> Result<Completion> {
        let body = json!({
            "model": self.config.chat_model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
        });
        with_retry(&self.config.retry, self.clock.as_ref(), || parse_chat(&self.post("chat/completions", &body)?))
    }

    fn embedding_dim(&self) -> Option<usize> {
        self.config.embedding_dim
    }

    fn embed(&self, _key: PairKey, text: &str) -> Result<Vec<f32>> {
        let body = json!({ "model": self.config.embedding_model, "input": text });
        with_retry(&self.config.retry, self.clock.as_ref(), || parse_embedding(&self.post("embeddings", &body)?))
    }

    fn estimate_tokens(&self, prompt: &str) -> u64 {
        crate::providers::synthetic::approx_tokens(prompt) + u64::from(self.config.max_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::rate::VirtualClock;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy { attempts: 3, base_delay_ms: 100 };
        assert_eq!(p.delay(1), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(200));
        assert_eq!(p.delay(3), Duration::from_millis(400));
    }

    #[test]
    fn retries_transient_then_surfaces() {
        let clock = VirtualClock::new();
        let p = RetryPolicy { attempts: 3, base_delay_ms: 100 };
        let mut n = 0;
        let r: Result<()> = with_retry(&p, &clock, || {
            n += 1;
            Err(Failure::Transient("boom".into()))
        });
        assert_eq!(n, 3);
        assert!(matches!(r, Err(Error::Provider { attempts: 3, .. })));
        assert_eq!(clock.now(), Duration::from_millis(300));

        let mut n = 0;
        let r = with_retry(&p, &clock, || {
            n += 1;
            if n < 2 {
                Err(Failure::Transient("once".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r.unwrap(), 7);
    }

    #[test]
    fn fatal_is_not_retried() {
        let clock = VirtualClock::new();
        let mut n = 0;
        let r: Result<()> = with_retry(&RetryPolicy::default(), &clock, || {
            n += 1;
            Err(Failure::Fatal("400".into()))
        });
        assert_eq!(n, 1);
        assert!(matches!(r, Err(Error::Provider { attempts: 1, .. })));
    }

    #[test]
    fn parses_wire_formats() {
        let chat = json!({"choices": [{"message": {"content": "hi"}}], "usage": {"prompt_tokens": 9, "completion_tokens": 2}});
        let c = parse_chat(&chat).ok().unwrap();
        assert_eq!(c.text, "hi");
        assert_eq!(c.usage, TokenUsage { prompt_tokens: 9, completion_tokens: 2 });
        let emb = json!({"data": [{"embedding": [0.5, -1.0]}]});
        assert_eq!(parse_embedding(&emb).ok().unwrap(), vec![0.5, -1.0]);
        assert!(parse_embedding(&json!({})).is_err());
    }
}
