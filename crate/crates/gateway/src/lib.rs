//! Clients for OpenAI-compatible chat and embedding services.
//!
//! Every response is stored in an append-only, content-addressed JSONL cache.
//! In [`BackendMode::Replay`] the cache is the only source and the network is
//! never touched.

mod batch;
mod chat;
mod client;
mod embedding;
mod error;
mod limiter;
mod retry;
pub mod transport;

pub use batch::parallel_map;
pub use chat::{
    audit_generation_cache, cache_key, Backend, BackendMode, CacheAudit, CacheKey, ChatGateway, GenerationCache,
    GenerationConfig, GenerationRecord, GenerationRequest,
};
pub use client::{Endpoint, GatewayStats};
pub use embedding::{
    EmbeddingCache, EmbeddingGateway, EmbeddingProvider, FixtureEmbeddingProvider, HttpEmbeddingProvider,
};
pub use error::GatewayError;
pub use limiter::FairLimiter;
pub use retry::{RetryPolicy, Sleeper, ThreadSleeper};
