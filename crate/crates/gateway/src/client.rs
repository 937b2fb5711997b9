//! Shared request path: credentials, bounded concurrency and retries.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::GatewayError;
use crate::limiter::FairLimiter;
use crate::retry::{RetryPolicy, Sleeper, ThreadSleeper};
use crate::transport::{HttpRequest, Transport, TransportError};

/// Where and how to reach one OpenAI-compatible service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub base_url: String,
    /// e.g. `/v1/chat/completions` or `/v1/embeddings`.
    pub path: String,
    /// Environment variable holding the bearer token; `None` sends no auth.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

impl Endpoint {
    pub fn url(&self) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), self.path)
    }

    fn bearer_token(&self) -> Result<Option<String>, GatewayError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .ok()
                .filter(|v| !v.is_empty())
                .map(Some)
                .ok_or_else(|| GatewayError::MissingCredentials(var.clone())),
        }
    }
}

/// Counters for everything that reached the transport or the cache.
#[derive(Debug, Default)]
pub struct GatewayStats {
    network_requests: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
}

impl GatewayStats {
    pub fn network_requests(&self) -> u64 {
        self.network_requests.load(Ordering::SeqCst)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub(crate) fn record_cache_hit(&self) {
        self.cache_hits.fetch_add(1, Ordering::SeqCst);
    }
}

pub(crate) struct ProviderClient {
    pub endpoint: Endpoint,
    transport: Arc<dyn Transport>,
    pub retry: RetryPolicy,
    sleeper: Arc<dyn Sleeper>,
    limiter: FairLimiter,
    pub stats: Arc<GatewayStats>,
}

pub(crate) struct Delivered {
    pub body: Value,
    pub retries: u32,
}

impl ProviderClient {
    pub fn new(endpoint: Endpoint, transport: Arc<dyn Transport>) -> Self {
        ProviderClient {
            endpoint,
            transport,
            retry: RetryPolicy::default(),
            sleeper: Arc::new(ThreadSleeper),
            limiter: FairLimiter::new(8),
            stats: Arc::new(GatewayStats::default()),
        }
    }

    pub fn set_sleeper(&mut self, sleeper: Arc<dyn Sleeper>) {
        self.sleeper = sleeper;
    }

    pub fn set_max_in_flight(&mut self, n: usize) {
        self.limiter = FairLimiter::new(n);
    }

    /// POSTs `body`, retrying on 429, 5xx, timeouts and connection failures.
    pub fn post(&self, body: Value) -> Result<Delivered, GatewayError> {
        let request = HttpRequest {
            url: self.endpoint.url(),
            bearer_token: self.endpoint.bearer_token()?,
            body,
            timeout: Duration::from_secs(self.endpoint.timeout_secs),
        };
        let mut retries = 0u32;
        let mut previous = Duration::ZERO;
        loop {
            let outcome = {
                let _permit = self.limiter.acquire();
                self.stats.network_requests.fetch_add(1, Ordering::SeqCst);
                self.transport.post_json(&request)
            };
            let (err, hint) = match outcome {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    let body = serde_json::from_str(&resp.body).map_err(|e| GatewayError::Decode(e.to_string()))?;
                    return Ok(Delivered { body, retries });
                }
                Ok(resp) if resp.status == 429 => (GatewayError::RateLimited { retries }, resp.retry_after),
                Ok(resp) if resp.status >= 500 => {
                    (GatewayError::ProviderError { status: resp.status, body: resp.body }, resp.retry_after)
                }
                Ok(resp) => {
                    return Err(GatewayError::ProviderError { status: resp.status, body: resp.body });
                }
                Err(TransportError::Timeout) => (GatewayError::Timeout, None),
                Err(TransportError::Connection(e)) => (GatewayError::Connection(e), None),
            };
            if retries >= self.retry.max_retries {
                return Err(err);
            }
            let delay = self.retry.delay(retries, hint, previous);
            log::warn!(
                "{} failed ({err}); retry {} of {} in {} ms",
                request.url,
                retries + 1,
                self.retry.max_retries,
                delay.as_millis()
            );
            self.sleeper.sleep(delay);
            previous = delay;
            retries += 1;
            self.stats.retries.fetch_add(1, Ordering::SeqCst);
        }
    }
}
