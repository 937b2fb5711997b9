//! Builds gateways from configuration. Replay mode never gets a network
//! transport, so a cache miss cannot turn into a request.

use std::sync::Arc;

use twinsim_gateway::transport::{HttpTransport, OfflineTransport, Transport};
use twinsim_gateway::{
    BackendMode, ChatGateway, EmbeddingCache, EmbeddingGateway, EmbeddingProvider, FixtureEmbeddingProvider,
    GenerationCache, HttpEmbeddingProvider,
};

use crate::config::{HarnessConfig, ModelProfile};
use crate::error::{HarnessError, Result};
use crate::store::Workspace;

fn transport(mode: BackendMode) -> Result<Arc<dyn Transport>> {
    Ok(match mode {
        BackendMode::Replay => Arc::new(OfflineTransport),
        BackendMode::Live => {
            Arc::new(HttpTransport::new().map_err(|e| HarnessError::Config(format!("http client: {e:?}")))?)
        }
    })
}

pub fn chat_gateway(
    cfg: &HarnessConfig,
    profile: &ModelProfile,
    ws: &Workspace,
    mode: BackendMode,
) -> Result<ChatGateway> {
    let cache = GenerationCache::open(ws.generation_cache_path())?;
    Ok(ChatGateway::new(mode, profile.endpoint.clone(), transport(mode)?, Arc::new(cache))
        .with_retry(cfg.retry.clone())
        .with_max_in_flight(cfg.max_in_flight))
}

pub fn embedding_gateway(cfg: &HarnessConfig, ws: &Workspace, mode: BackendMode) -> Result<EmbeddingGateway> {
    let settings = &cfg.embeddings;
    let provider: Arc<dyn EmbeddingProvider> = match (&settings.fixture, &settings.endpoint) {
        (Some(path), _) => Arc::new(FixtureEmbeddingProvider::from_jsonl(cfg.resolve(path))?),
        (None, Some(endpoint)) => Arc::new(
            HttpEmbeddingProvider::new(endpoint.clone(), transport(mode)?)
                .with_retry(cfg.retry.clone())
                .with_max_in_flight(cfg.max_in_flight),
        ),
        (None, None) => return Err(HarnessError::Config("embeddings need a fixture or an endpoint".into())),
    };
    let cache = EmbeddingCache::open(ws.embedding_cache_path())?;
    let mut gw = EmbeddingGateway::new(mode, provider, Arc::new(cache));
    for (model, limit) in &settings.input_limits {
        gw = gw.with_input_limit(model.clone(), *limit);
    }
    Ok(gw)
}
