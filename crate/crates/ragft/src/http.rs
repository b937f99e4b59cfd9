//! HTTP clients for live model services.
//!
//! Wire formats:
//! - embeddings: OpenAI-compatible `POST {endpoint}/embeddings` with
//!   `{model, input: [..]}`, reading `data[].embedding` ordered by `index`.
//! - chat: OpenAI-compatible `POST {endpoint}/chat/completions` with
//!   `{model, messages, temperature: 0}`, reading `choices[0].message.content`.
//! - rerank: Cohere-compatible `POST {endpoint}/rerank` with
//!   `{model, query, documents, top_n}`, reading `results[].index` in order.
//!
//! Transport errors, HTTP 429 and 5xx, and empty completions are retried
//! with capped exponential backoff. Other 4xx responses fail immediately.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use ragft_core::provider::{
    check_chat_inputs, check_embed_inputs, check_rerank_inputs, Candidate, ChatModel, Embedder, EmbeddingVector,
    Message, ProviderError, Reranker,
};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::ProviderConfig;
use crate::error::AppResult;

/// Counting semaphore bounding requests in flight.
#[derive(Debug)]
pub struct Semaphore {
    available: Mutex<usize>,
    cv: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Self { available: Mutex::new(permits.max(1)), cv: Condvar::new() }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base: Duration,
    pub cap: Duration,
}

impl RetryPolicy {
    /// Delay before retry number `retry` (0-based): `base * 2^retry`, capped.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(31)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }
}

/// Outcome of one attempt.
#[derive(Debug)]
pub enum AttemptError {
    Retryable(String),
    Fatal(ProviderError),
}

/// Runs `attempt` until it succeeds, fails fatally, or retries run out.
/// A success is returned immediately and never repeated.
pub fn with_retry<T>(
    provider: &str,
    policy: RetryPolicy,
    mut attempt: impl FnMut() -> Result<T, AttemptError>,
) -> Result<T, ProviderError> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        match attempt() {
            Ok(v) => return Ok(v),
            Err(AttemptError::Fatal(e)) => return Err(e),
            Err(AttemptError::Retryable(message)) => {
                if attempts > policy.max_retries {
                    return Err(ProviderError::Exhausted { provider: provider.into(), attempts, message });
                }
                let delay = policy.delay(attempts - 1);
                log::debug!("{provider}: attempt {attempts} failed ({message}); retrying in {delay:?}");
                thread::sleep(delay);
            }
        }
    }
}

/// Shared transport: agent, credentials, retry policy and concurrency cap.
#[derive(Clone)]
pub struct HttpClient {
    name: String,
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    semaphore: Arc<Semaphore>,
    batch_size: usize,
}

impl HttpClient {
    pub fn new(name: &str, config: &ProviderConfig) -> AppResult<Self> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            name: name.into(),
            agent,
            endpoint: config.endpoint.trim_end_matches('/').to_string(),
            model: config.model_name.clone(),
            api_key: config.api_key()?,
            policy: RetryPolicy {
                max_retries: config.max_retries,
                base: Duration::from_millis(config.backoff_base_ms),
                cap: Duration::from_millis(config.backoff_cap_ms),
            },
            semaphore: Arc::new(Semaphore::new(config.max_concurrency)),
            batch_size: config.batch_size.max(1),
        })
    }

    fn post_once(&self, path: &str, body: &Value) -> Result<Value, AttemptError> {
        let _permit = self.semaphore.acquire();
        let mut request = self.agent.post(format!("{}{path}", self.endpoint));
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| AttemptError::Retryable(format!("transport: {e}")))?;
        let status = response.status().as_u16();
        let text =
            response.body_mut().read_to_string().map_err(|e| AttemptError::Retryable(format!("reading body: {e}")))?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| AttemptError::Fatal(ProviderError::Invalid(format!("{}: {e}", self.name)))),
            429 | 500..=599 => Err(AttemptError::Retryable(format!("HTTP {status}: {}", truncate(&text)))),
            _ => Err(AttemptError::Fatal(ProviderError::Exhausted {
                provider: self.name.clone(),
                attempts: 1,
                message: format!("HTTP {status}: {}", truncate(&text)),
            })),
        }
    }

    /// Posts with retries, then decodes with `parse`. Decoding failures that
    /// `parse` marks retryable are retried like transport errors.
    fn post<T>(
        &self,
        path: &str,
        body: &Value,
        parse: impl Fn(Value) -> Result<T, AttemptError>,
    ) -> Result<T, ProviderError> {
        with_retry(&self.name, self.policy, || self.post_once(path, body).and_then(&parse))
    }
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn invalid(provider: &str, what: impl std::fmt::Display) -> AttemptError {
    AttemptError::Fatal(ProviderError::Invalid(format!("{provider}: {what}")))
}

pub struct OpenAiEmbedder {
    client: HttpClient,
}

impl OpenAiEmbedder {
    pub fn new(config: &ProviderConfig) -> AppResult<Self> {
        Ok(Self { client: HttpClient::new("embeddings", config)? })
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        #[derive(Deserialize)]
        struct Item {
            index: usize,
            embedding: Vec<f64>,
        }
        #[derive(Deserialize)]
        struct Response {
            data: Vec<Item>,
        }
        let body = json!({ "model": self.client.model, "input": texts });
        let n = texts.len();
        let raw = self.client.post("/embeddings", &body, |v| {
            let mut r: Response = serde_json::from_value(v).map_err(|e| invalid("embeddings", e))?;
            r.data.sort_by_key(|i| i.index);
            if r.data.len() != n || r.data.iter().enumerate().any(|(i, item)| item.index != i) {
                return Err(invalid("embeddings", format!("expected {n} embeddings indexed 0..{n}")));
            }
            Ok(r.data.into_iter().map(|i| i.embedding).collect::<Vec<_>>())
        })?;
        raw.into_iter().map(EmbeddingVector::normalized).collect()
    }
}

impl Embedder for OpenAiEmbedder {
    /// Splits `texts` into batches sent concurrently, up to the client's
    /// concurrency limit; output order matches input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_embed_inputs(texts)?;
        let batches: Vec<&[&str]> = texts.chunks(self.client.batch_size).collect();
        let results: Vec<Result<Vec<EmbeddingVector>, ProviderError>> = thread::scope(|s| {
            let handles: Vec<_> = batches.iter().map(|b| s.spawn(move || self.embed_batch(b))).collect();
            handles.into_iter().map(|h| h.join().expect("embedding worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(texts.len());
        for r in results {
            out.extend(r?);
        }
        if let Some(first) = out.first() {
            let dim = first.dim();
            if out.iter().any(|v| v.dim() != dim) {
                return Err(ProviderError::Config("embedding dimension changed between batches".into()));
            }
        }
        Ok(out)
    }
}

pub struct OpenAiChat {
    client: HttpClient,
}

impl OpenAiChat {
    pub fn new(config: &ProviderConfig) -> AppResult<Self> {
        Ok(Self { client: HttpClient::new("chat", config)? })
    }
}

impl ChatModel for OpenAiChat {
    fn chat(&self, messages: &[Message]) -> Result<String, ProviderError> {
        check_chat_inputs(messages)?;
        let body = json!({ "model": self.client.model, "messages": messages, "temperature": 0 });
        self.client.post("/chat/completions", &body, |v| {
            let content = v.pointer("/choices/0/message/content").and_then(Value::as_str).unwrap_or_default();
            if content.trim().is_empty() {
                return Err(AttemptError::Retryable(ProviderError::EmptyCompletion.to_string()));
            }
            Ok(content.to_string())
        })
    }
}

pub struct CohereReranker {
    client: HttpClient,
}

impl CohereReranker {
    pub fn new(config: &ProviderConfig) -> AppResult<Self> {
        Ok(Self { client: HttpClient::new("rerank", config)? })
    }
}

impl Reranker for CohereReranker {
    fn rerank(&self, query: &str, candidates: &[Candidate<'_>], top_k: usize) -> Result<Vec<String>, ProviderError> {
        check_rerank_inputs(top_k)?;
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        #[derive(Deserialize)]
        struct Item {
            index: usize,
        }
        #[derive(Deserialize)]
        struct Response {
            results: Vec<Item>,
        }
        let documents: Vec<&str> = candidates.iter().map(|c| c.text).collect();
        let top_n = top_k.min(candidates.len());
        let body = json!({ "model": self.client.model, "query": query, "documents": documents, "top_n": top_n });
        self.client.post("/rerank", &body, |v| {
            let r: Response = serde_json::from_value(v).map_err(|e| invalid("rerank", e))?;
            r.results
                .iter()
                .take(top_n)
                .map(|item| {
                    candidates
                        .get(item.index)
                        .map(|c| c.id.to_string())
                        .ok_or_else(|| invalid("rerank", format!("result index {} out of range", item.index)))
                })
                .collect()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn backoff_doubles_then_caps() {
        let p = RetryPolicy { max_retries: 5, base: Duration::from_millis(100), cap: Duration::from_millis(350) };
        let d: Vec<u128> = (0..5).map(|i| p.delay(i).as_millis()).collect();
        assert_eq!(d, [100, 200, 350, 350, 350]);
    }

    #[test]
    fn retry_counts_attempts_and_stops_on_success() {
        let p = RetryPolicy { max_retries: 3, base: Duration::ZERO, cap: Duration::ZERO };
        let calls = AtomicUsize::new(0);
        let r = with_retry("t", p, || {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(AttemptError::Retryable("boom".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r.unwrap(), 7);
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let r: Result<(), _> = with_retry("t", p, || Err(AttemptError::Retryable("down".into())));
        assert!(matches!(r, Err(ProviderError::Exhausted { attempts: 4, .. })));

        calls.store(0, Ordering::SeqCst);
        let r: Result<(), _> = with_retry("t", p, || {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(AttemptError::Fatal(ProviderError::Invalid("bad".into())))
        });
        assert!(r.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn semaphore_caps_parallelism() {
        let sem = Semaphore::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
