//! Shared plumbing for model-backed providers reached over HTTP.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("invalid provider response: {0}")]
    InvalidResponse(String),
}

/// Counts outbound provider calls. Clones share the same counter.
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicU64>);

impl CallCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone)]
pub struct HttpEndpoint {
    pub url: String,
    pub timeout: Duration,
    /// Additional attempts after the first failure.
    pub retries: u32,
    pub backoff: Duration,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>) -> Self {
        HttpEndpoint {
            url: url.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(200),
        }
    }
}

/// Blocking JSON-over-HTTP client with bounded retries.
///
/// Transport failures and 5xx responses are retried; 4xx responses are not.
#[derive(Debug, Clone)]
pub struct JsonClient {
    endpoint: HttpEndpoint,
    agent: ureq::Agent,
    counter: CallCounter,
}

impl JsonClient {
    pub fn new(endpoint: HttpEndpoint, counter: CallCounter) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(true)
            .build()
            .into();
        JsonClient {
            endpoint,
            agent,
            counter,
        }
    }

    pub fn url(&self) -> &str {
        &self.endpoint.url
    }

    pub fn post<Req, Resp>(&self, body: &Req) -> Result<Resp, ProviderError>
    where
        Req: Serialize + ?Sized,
        Resp: DeserializeOwned,
    {
        let mut last_error = String::new();
        for attempt in 0..=self.endpoint.retries {
            if attempt > 0 {
                std::thread::sleep(self.endpoint.backoff * attempt);
            }
            self.counter.record();
            match self.agent.post(&self.endpoint.url).send_json(body) {
                Ok(mut response) => {
                    return response
                        .body_mut()
                        .read_json::<Resp>()
                        .map_err(|e| ProviderError::InvalidResponse(e.to_string()));
                }
                Err(ureq::Error::StatusCode(code)) if code < 500 => {
                    return Err(ProviderError::Unavailable(format!(
                        "{} answered HTTP {code}",
                        self.endpoint.url
                    )));
                }
                Err(e) => {
                    tracing::debug!(url = %self.endpoint.url, attempt, error = %e, "provider call failed");
                    last_error = e.to_string();
                }
            }
        }
        Err(ProviderError::Unavailable(format!(
            "{} after {} attempts: {last_error}",
            self.endpoint.url,
            self.endpoint.retries + 1
        )))
    }
}

/// Where the model-backed providers live. Every unset URL selects the
/// offline implementation; every set URL is wrapped with the offline one as
/// fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSettings {
    /// Base URL of the judge; `/grade`, `/categorize` and
    /// `/confirm-relation` are appended.
    pub judge_url: Option<String>,
    pub embedding_url: Option<String>,
    pub generator_url: Option<String>,
    pub embedding_dim: usize,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        ProviderSettings {
            judge_url: None,
            embedding_url: None,
            generator_url: None,
            embedding_dim: crate::search::DEFAULT_DIM,
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

impl ProviderSettings {
    fn endpoint(&self, url: String) -> HttpEndpoint {
        HttpEndpoint {
            timeout: Duration::from_millis(self.timeout_ms),
            retries: self.retries,
            ..HttpEndpoint::new(url)
        }
    }

    pub fn judge(&self, counter: &CallCounter) -> Arc<dyn crate::judge::JudgeProvider> {
        use crate::judge::{RemoteJudge, RuleJudge, WithFallback};
        match &self.judge_url {
            None => Arc::new(RuleJudge::default()),
            Some(base) => {
                let base = base.trim_end_matches('/');
                let remote = RemoteJudge::new(base, self.endpoint(format!("{base}/grade")), counter.clone())
                    .with_categorize(self.endpoint(format!("{base}/categorize")), counter.clone())
                    .with_relations(self.endpoint(format!("{base}/confirm-relation")), counter.clone());
                Arc::new(WithFallback::new(remote))
            }
        }
    }

    pub fn embedder(&self, counter: &CallCounter) -> Arc<dyn crate::search::EmbeddingProvider> {
        use crate::search::{EmbedWithFallback, HashEmbedder, RemoteEmbedder};
        match &self.embedding_url {
            None => Arc::new(HashEmbedder::new(self.embedding_dim)),
            Some(url) => Arc::new(EmbedWithFallback::new(RemoteEmbedder::new(
                url.as_str(),
                self.embedding_dim,
                self.endpoint(url.clone()),
                counter.clone(),
            ))),
        }
    }

    pub fn generator(&self, counter: &CallCounter) -> Box<dyn crate::creation::GeneratorProvider> {
        use crate::creation::{GenerateWithFallback, RemoteGenerator, TemplateGenerator};
        match &self.generator_url {
            None => Box::new(TemplateGenerator),
            Some(url) => Box::new(GenerateWithFallback::new(RemoteGenerator::new(
                url.as_str(),
                self.endpoint(url.clone()),
                counter.clone(),
            ))),
        }
    }
}
