//! HTTP clients for the completion and embedding services.
//!
//! Both clients speak a minimal JSON wire protocol:
//!
//! * completion — `POST` `{"model", "prompt", "temperature", "max_tokens"}`
//!   to the endpoint, response `{"text": "..."}`.
//! * embedding — `POST` `{"texts": [...]}` to the endpoint, response
//!   `{"vectors": [[...], ...]}` with one vector per input text.
//!
//! Completion requests always carry temperature `0.0`: annotation output
//! feeds deterministic downstream stages, so decoding must be greedy.
//! Transient failures (connection errors, HTTP 429 and 5xx) are retried
//! with exponential backoff; other failures surface immediately. When the
//! `FLOWMINE_API_KEY` environment variable is set, both clients send it
//! as a bearer token.

use std::time::Duration;

use serde::Deserialize;

use flowmine_core::embedding::{EmbeddingProvider, ProviderError};
use flowmine_core::prompt::{CompletionError, CompletionService};

/// Environment variable holding the bearer token for both services.
pub const API_KEY_VAR: &str = "FLOWMINE_API_KEY";

/// Default delay before the first retry; later retries double it.
const DEFAULT_BACKOFF_BASE_MS: u64 = 100;

/// A successful completion response body.
#[derive(Debug, Deserialize)]
struct CompletionResponse {
    text: String,
}

/// A successful embedding response body.
#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    vectors: Vec<Vec<f64>>,
}

/// Whether a failed attempt is worth retrying.
enum Failure {
    /// Connection-level or server-side trouble; retry may succeed.
    Transient(String),
    /// The request itself is bad; retrying cannot help.
    Permanent(String),
}

/// Sends `body` to `endpoint` up to `1 + max_retries` times, sleeping
/// `backoff_base_ms * 2^attempt` between tries, and returns the response
/// body text.
fn post_with_retries(
    client: &reqwest::blocking::Client,
    endpoint: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
    max_retries: u32,
    backoff_base_ms: u64,
) -> Result<String, String> {
    let mut last_failure = String::new();
    for attempt in 0..=max_retries {
        if attempt > 0 {
            let delay = backoff_base_ms.saturating_mul(1 << (attempt - 1));
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut request = client.post(endpoint).json(body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        let outcome = match request.send() {
            Err(e) => Failure::Transient(format!("request failed: {e}")),
            Ok(response) => {
                let status = response.status();
                if status.is_success() {
                    match response.text() {
                        Ok(text) => return Ok(text),
                        Err(e) => Failure::Transient(format!("cannot read response body: {e}")),
                    }
                } else if status.as_u16() == 429 || status.is_server_error() {
                    Failure::Transient(format!("server returned {status}"))
                } else {
                    Failure::Permanent(format!("server returned {status}"))
                }
            }
        };
        match outcome {
            Failure::Transient(message) => last_failure = message,
            Failure::Permanent(message) => return Err(message),
        }
    }
    Err(format!(
        "giving up after {} attempts: {last_failure}",
        max_retries + 1
    ))
}

/// Blocking client for the completion service.
pub struct CompletionClient {
    endpoint: String,
    model: String,
    max_tokens: u32,
    max_retries: u32,
    backoff_base_ms: u64,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl CompletionClient {
    /// Builds a client for `endpoint`, reading the bearer token from
    /// the environment.
    pub fn new(
        endpoint: &str,
        model: &str,
        timeout_ms: u64,
        max_retries: u32,
        max_tokens: u32,
    ) -> Self {
        CompletionClient {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            max_tokens,
            max_retries,
            backoff_base_ms: DEFAULT_BACKOFF_BASE_MS,
            api_key: std::env::var(API_KEY_VAR).ok(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_millis(timeout_ms))
                .build()
                .expect("the HTTP client builder accepts these options"),
        }
    }

    /// Overrides the backoff base; tests use `0` to retry instantly.
    pub fn with_backoff_base_ms(mut self, backoff_base_ms: u64) -> Self {
        self.backoff_base_ms = backoff_base_ms;
        self
    }
}

impl CompletionService for CompletionClient {
    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "temperature": 0.0,
            "max_tokens": self.max_tokens,
        });
        let raw = post_with_retries(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &body,
            self.max_retries,
            self.backoff_base_ms,
        )
        .map_err(|message| CompletionError::new(format!("{}: {message}", self.endpoint)))?;
        let response: CompletionResponse = serde_json::from_str(&raw).map_err(|e| {
            CompletionError::new(format!("{}: malformed response: {e}", self.endpoint))
        })?;
        Ok(response.text)
    }
}

/// Blocking client for the embedding service.
pub struct HttpEmbeddingProvider {
    endpoint: String,
    tag: String,
    max_retries: u32,
    backoff_base_ms: u64,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEmbeddingProvider {
    /// Builds a provider for `endpoint` whose vectors are labeled `tag`,
    /// reading the bearer token from the environment.
    pub fn new(endpoint: &str, tag: &str, timeout_ms: u64, max_retries: u32) -> Self {
        HttpEmbeddingProvider {
            endpoint: endpoint.to_string(),
            tag: tag.to_string(),
            max_retries,
            backoff_base_ms: DEFAULT_BACKOFF_BASE_MS,
            api_key: std::env::var(API_KEY_VAR).ok(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_millis(timeout_ms))
                .build()
                .expect("the HTTP client builder accepts these options"),
        }
    }

    /// Overrides the backoff base; tests use `0` to retry instantly.
    pub fn with_backoff_base_ms(mut self, backoff_base_ms: u64) -> Self {
        self.backoff_base_ms = backoff_base_ms;
        self
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = serde_json::json!({ "texts": texts });
        let raw = post_with_retries(
            &self.client,
            &self.endpoint,
            self.api_key.as_deref(),
            &body,
            self.max_retries,
            self.backoff_base_ms,
        )
        .map_err(|message| ProviderError::new(format!("{}: {message}", self.endpoint)))?;
        let response: EmbeddingResponse = serde_json::from_str(&raw).map_err(|e| {
            ProviderError::new(format!("{}: malformed response: {e}", self.endpoint))
        })?;
        if response.vectors.len() != texts.len() {
            return Err(ProviderError::new(format!(
                "{}: expected {} vectors, got {}",
                self.endpoint,
                texts.len(),
                response.vectors.len()
            )));
        }
        Ok(response.vectors)
    }

    fn provider_tag(&self) -> &str {
        &self.tag
    }
}
