use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Exponential backoff without jitter, so delays never decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_delay_ms: u64,
    pub max_delay_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, initial_delay_ms: 500, max_delay_ms: 30_000, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { max_retries: 0, ..Default::default() }
    }

    /// Delay before retry number `retry` (0-based). A server-provided
    /// `Retry-After` raises the delay but never beyond the cap, and the result
    /// is never below `previous`.
    pub fn delay(&self, retry: u32, retry_after: Option<Duration>, previous: Duration) -> Duration {
        let cap = Duration::from_millis(self.max_delay_ms);
        let exp = self.initial_delay_ms as f64 * self.multiplier.max(1.0).powi(retry as i32);
        let mut d = Duration::from_millis(exp.min(self.max_delay_ms as f64) as u64);
        if let Some(hint) = retry_after {
            d = d.max(hint.min(cap));
        }
        d.max(previous)
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}
