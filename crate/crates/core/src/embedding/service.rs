use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, DEFAULT_DIMENSION};

const MAX_BACKOFF: Duration = Duration::from_secs(5);

/// Connection settings for an embedding service speaking
/// `POST /embed {"texts": [...]}` → `{"embeddings": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Base URL; `/embed` is appended unless already present.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Texts per request.
    pub batch_size: usize,
    /// Requests in flight at once.
    pub parallelism: usize,
    pub dimension: usize,
    /// First retry delay; doubles per retry, capped at five seconds.
    pub backoff_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_ms: 10_000,
            max_retries: 3,
            batch_size: 64,
            parallelism: 4,
            dimension: DEFAULT_DIMENSION,
            backoff_ms: 100,
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

enum Attempt {
    Retryable(String),
    Fatal(EmbedError),
}

/// Blocking client for a remote sentence encoder.
///
/// Large inputs are split into `batch_size` chunks sent with up to
/// `parallelism` requests in flight. Output order always matches input
/// order. Transport failures, non-200 statuses and malformed bodies are
/// retried with exponential backoff and end in `service_unavailable`; a
/// vector of the wrong width fails immediately with `dimension_mismatch`.
#[derive(Debug)]
pub struct ServiceEmbedder {
    config: ServiceConfig,
    url: String,
    agent: ureq::Agent,
}

impl ServiceEmbedder {
    pub fn new(config: ServiceConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/embed") {
            base.to_string()
        } else {
            format!("{base}/embed")
        };
        ServiceEmbedder { config, url, agent }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn request_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, Attempt> {
        let body = serde_json::to_string(&EmbedRequest { texts })
            .map_err(|e| Attempt::Fatal(EmbedError::ServiceUnavailable(e.to_string())))?;
        let mut response = self
            .agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body.as_str())
            .map_err(|e| Attempt::Retryable(format!("request to {} failed: {e}", self.url)))?;
        let status = response.status();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retryable(format!("reading response body: {e}")))?;
        if status.as_u16() != 200 {
            return Err(Attempt::Retryable(format!(
                "service answered HTTP {status}"
            )));
        }
        let parsed: EmbedResponse = serde_json::from_str(&text)
            .map_err(|e| Attempt::Retryable(format!("malformed response body: {e}")))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(Attempt::Retryable(format!(
                "malformed response body: {} embeddings for {} texts",
                parsed.embeddings.len(),
                texts.len()
            )));
        }
        if let Some(bad) = parsed
            .embeddings
            .iter()
            .find(|v| v.len() != self.config.dimension)
        {
            return Err(Attempt::Fatal(EmbedError::DimensionMismatch {
                expected: self.config.dimension,
                actual: bad.len(),
            }));
        }
        Ok(parsed
            .embeddings
            .into_iter()
            .map(EmbeddingVector::new)
            .collect())
    }

    fn request_with_retries(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            match self.request_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(Attempt::Fatal(err)) => return Err(err),
                Err(Attempt::Retryable(reason)) => {
                    if attempt >= self.config.max_retries {
                        return Err(EmbedError::ServiceUnavailable(format!(
                            "{reason} (after {} attempts)",
                            attempt + 1
                        )));
                    }
                }
            }
            attempt += 1;
            thread::sleep(delay);
            delay = (delay * 2).min(MAX_BACKOFF);
        }
    }
}

impl EmbeddingProvider for ServiceEmbedder {
    fn name(&self) -> &str {
        "service"
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn deterministic(&self) -> bool {
        false
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Err(EmbedError::EmptyInput);
        }
        let chunks: Vec<&[&str]> = texts.chunks(self.config.batch_size.max(1)).collect();
        let workers = self.config.parallelism.clamp(1, chunks.len());
        if workers == 1 {
            let mut out = Vec::with_capacity(texts.len());
            for chunk in chunks {
                out.extend(self.request_with_retries(chunk)?);
            }
            return Ok(out);
        }

        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel();
        thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, chunks) = (&next, &chunks);
                scope.spawn(move || loop {
                    let index = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(index) else {
                        break;
                    };
                    let result = self.request_with_retries(chunk);
                    if tx.send((index, result)).is_err() {
                        break;
                    }
                });
            }
        });
        drop(tx);

        let mut slots: Vec<Option<Result<Vec<EmbeddingVector>, EmbedError>>> =
            (0..chunks.len()).map(|_| None).collect();
        for (index, result) in rx {
            slots[index] = Some(result);
        }
        let mut out = Vec::with_capacity(texts.len());
        for slot in slots {
            out.extend(slot.expect("every chunk reports exactly once")?);
        }
        Ok(out)
    }
}
