//! Text embedding services behind a cache.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use twinsim_core::metrics::EmbeddingVector;

use crate::batch::parallel_map;
use crate::chat::{open_append, BackendMode};
use crate::client::{Endpoint, ProviderClient};
use crate::error::GatewayError;
use crate::retry::{RetryPolicy, Sleeper};
use crate::transport::Transport;

/// A text-to-vector service.
pub trait EmbeddingProvider: Send + Sync {
    fn embed_text(&self, model_id: &str, text: &str) -> Result<Vec<f64>, GatewayError>;
}

/// OpenAI-compatible `/embeddings` endpoint.
pub struct HttpEmbeddingProvider {
    client: ProviderClient,
}

impl HttpEmbeddingProvider {
    pub fn new(endpoint: Endpoint, transport: Arc<dyn Transport>) -> Self {
        HttpEmbeddingProvider { client: ProviderClient::new(endpoint, transport) }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.client.set_sleeper(sleeper);
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.client.set_max_in_flight(n);
        self
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn embed_text(&self, model_id: &str, text: &str) -> Result<Vec<f64>, GatewayError> {
        let delivered = self.client.post(json!({ "model": model_id, "input": [text] }))?;
        let values = delivered.body["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| GatewayError::Decode("response has no data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| GatewayError::Decode("non-numeric embedding value".into())))
            .collect::<Result<Vec<f64>, _>>()?;
        Ok(values)
    }
}

#[derive(Debug, Deserialize)]
struct FixtureLine {
    text: String,
    #[serde(alias = "embedding")]
    values: Vec<f64>,
    #[serde(default)]
    model_id: Option<String>,
}

/// Lookup table of `text -> vector`, read from JSONL lines
/// `{"text": ..., "values": [...], "model_id": optional}`. Lines without a
/// model id serve every model.
#[derive(Debug, Default, Clone)]
pub struct FixtureEmbeddingProvider {
    table: HashMap<(Option<String>, String), Vec<f64>>,
}

impl FixtureEmbeddingProvider {
    pub fn from_jsonl(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let mut fixture = FixtureEmbeddingProvider::default();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureLine = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Decode(format!("{}:{}: {e}", path.display(), i + 1)))?;
            fixture.table.insert((entry.model_id, entry.text), entry.values);
        }
        Ok(fixture)
    }

    pub fn insert(&mut self, model_id: Option<&str>, text: impl Into<String>, values: Vec<f64>) {
        self.table.insert((model_id.map(str::to_owned), text.into()), values);
    }
}

impl EmbeddingProvider for FixtureEmbeddingProvider {
    fn embed_text(&self, model_id: &str, text: &str) -> Result<Vec<f64>, GatewayError> {
        self.table
            .get(&(Some(model_id.to_string()), text.to_string()))
            .or_else(|| self.table.get(&(None, text.to_string())))
            .cloned()
            .ok_or_else(|| GatewayError::ProviderError {
                status: 404,
                body: format!("fixture has no vector for {text:?}"),
            })
    }
}

fn embedding_key(model_id: &str, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(b"embed.v1\0");
    h.update(model_id.as_bytes());
    h.update(b"\0");
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct CachedVector {
    key: String,
    vector: EmbeddingVector,
}

/// Append-only JSONL cache of embeddings keyed by hash of `(model, text)`.
pub struct EmbeddingCache {
    path: Option<PathBuf>,
    vectors: RwLock<HashMap<String, EmbeddingVector>>,
    writer: Mutex<Option<File>>,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        EmbeddingCache { path: None, vectors: RwLock::new(HashMap::new()), writer: Mutex::new(None) }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut vectors = HashMap::new();
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CachedVector>(&line) {
                    Ok(c) => {
                        vectors.entry(c.key).or_insert(c.vector);
                    }
                    Err(e) => log::warn!("{}: skipping unreadable cache line: {e}", path.display()),
                }
            }
        }
        let file = open_append(&path)?;
        Ok(EmbeddingCache { path: Some(path), vectors: RwLock::new(vectors), writer: Mutex::new(Some(file)) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.vectors.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vector count per model id.
    pub fn model_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for v in self.vectors.read().unwrap().values() {
            *counts.entry(v.model_id().to_string()).or_insert(0) += 1;
        }
        counts
    }

    fn get(&self, key: &str) -> Option<EmbeddingVector> {
        self.vectors.read().unwrap().get(key).cloned()
    }

    fn insert(&self, key: String, vector: EmbeddingVector) -> Result<(), GatewayError> {
        let mut writer = self.writer.lock().unwrap();
        if self.vectors.read().unwrap().contains_key(&key) {
            return Ok(());
        }
        if let Some(file) = writer.as_mut() {
            let entry = CachedVector { key, vector };
            let mut line = serde_json::to_string(&entry).map_err(|e| GatewayError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
            self.vectors.write().unwrap().insert(entry.key, entry.vector);
        } else {
            self.vectors.write().unwrap().insert(key, vector);
        }
        Ok(())
    }
}

/// `f(t)`: cached, dimension-checked embeddings.
pub struct EmbeddingGateway {
    mode: BackendMode,
    provider: Arc<dyn EmbeddingProvider>,
    cache: Arc<EmbeddingCache>,
    input_limits: HashMap<String, usize>,
    dims: Mutex<HashMap<String, usize>>,
    provider_calls: AtomicU64,
}

impl EmbeddingGateway {
    pub fn new(mode: BackendMode, provider: Arc<dyn EmbeddingProvider>, cache: Arc<EmbeddingCache>) -> Self {
        EmbeddingGateway {
            mode,
            provider,
            cache,
            input_limits: HashMap::new(),
            dims: Mutex::new(HashMap::new()),
            provider_calls: AtomicU64::new(0),
        }
    }

    /// Texts longer than `max_chars` are refused for `model_id`, never truncated.
    pub fn with_input_limit(mut self, model_id: impl Into<String>, max_chars: usize) -> Self {
        self.input_limits.insert(model_id.into(), max_chars);
        self
    }

    pub fn provider_calls(&self) -> u64 {
        self.provider_calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    fn check_dims(&self, model_id: &str, dims: usize) -> Result<(), GatewayError> {
        let mut known = self.dims.lock().unwrap();
        match known.get(model_id) {
            Some(d) if *d != dims => {
                Err(GatewayError::Decode(format!("`{model_id}` returned {dims} dimensions, expected {d}")))
            }
            Some(_) => Ok(()),
            None => {
                known.insert(model_id.to_string(), dims);
                Ok(())
            }
        }
    }

    pub fn embed(&self, text: &str, model_id: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyText);
        }
        if let Some(limit) = self.input_limits.get(model_id) {
            let chars = text.chars().count();
            if chars > *limit {
                return Err(GatewayError::TextTooLong { model_id: model_id.to_string(), chars, limit: *limit });
            }
        }
        let key = embedding_key(model_id, text);
        if let Some(v) = self.cache.get(&key) {
            self.check_dims(model_id, v.dims())?;
            return Ok(v);
        }
        if self.mode == BackendMode::Replay {
            return Err(GatewayError::ReplayMiss(key));
        }
        self.provider_calls.fetch_add(1, Ordering::SeqCst);
        let values = self.provider.embed_text(model_id, text)?;
        let vector = EmbeddingVector::new(model_id, values).map_err(|e| GatewayError::Decode(e.to_string()))?;
        self.check_dims(model_id, vector.dims())?;
        self.cache.insert(key, vector.clone())?;
        Ok(vector)
    }

    /// Embeds each distinct text once, in parallel, and returns vectors in
    /// input order.
    pub fn embed_batch(
        &self,
        texts: &[String],
        model_id: &str,
        parallelism: usize,
    ) -> Vec<Result<EmbeddingVector, GatewayError>> {
        let mut distinct: Vec<&str> = Vec::new();
        let mut slot: HashMap<&str, usize> = HashMap::new();
        for t in texts {
            slot.entry(t.as_str()).or_insert_with(|| {
                distinct.push(t.as_str());
                distinct.len() - 1
            });
        }
        let results = parallel_map(&distinct, parallelism, |_, t| self.embed(t, model_id), |_, _| {});
        texts.iter().map(|t| results[slot[t.as_str()]].clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Arc<FixtureEmbeddingProvider> {
        let mut f = FixtureEmbeddingProvider::default();
        f.insert(None, "a", vec![1.0, 0.0]);
        f.insert(None, "b", vec![0.0, 1.0]);
        f.insert(Some("other"), "a", vec![2.0, 2.0, 2.0]);
        Arc::new(f)
    }

    #[test]
    fn fixture_vectors_exact() {
        let g = EmbeddingGateway::new(BackendMode::Live, fixture(), Arc::new(EmbeddingCache::in_memory()));
        assert_eq!(g.embed("a", "m").unwrap().values(), &[1.0, 0.0]);
        assert_eq!(g.embed("b", "m").unwrap().values(), &[0.0, 1.0]);
        assert_eq!(g.embed("a", "other").unwrap().dims(), 3);
        assert!(matches!(g.embed("zzz", "m"), Err(GatewayError::ProviderError { status: 404, .. })));
        assert_eq!(g.embed("  ", "m"), Err(GatewayError::EmptyText));
    }

    #[test]
    fn cache_makes_repeat_calls_free() {
        let g = EmbeddingGateway::new(BackendMode::Live, fixture(), Arc::new(EmbeddingCache::in_memory()));
        let first = g.embed("a", "m").unwrap();
        let second = g.embed("a", "m").unwrap();
        assert_eq!(first, second);
        assert_eq!(g.provider_calls(), 1);
    }

    #[test]
    fn too_long_text_fails_loudly() {
        let g = EmbeddingGateway::new(BackendMode::Live, fixture(), Arc::new(EmbeddingCache::in_memory()))
            .with_input_limit("m", 3);
        assert!(matches!(g.embed("abcd", "m"), Err(GatewayError::TextTooLong { chars: 4, limit: 3, .. })));
    }

    #[test]
    fn replay_without_cache_misses() {
        let g = EmbeddingGateway::new(BackendMode::Replay, fixture(), Arc::new(EmbeddingCache::in_memory()));
        assert!(matches!(g.embed("a", "m"), Err(GatewayError::ReplayMiss(_))));
        assert_eq!(g.provider_calls(), 0);
    }

    #[test]
    fn dimension_change_is_an_error() {
        let mut f = FixtureEmbeddingProvider::default();
        f.insert(None, "a", vec![1.0, 0.0]);
        f.insert(None, "b", vec![1.0, 0.0, 0.0]);
        let g = EmbeddingGateway::new(BackendMode::Live, Arc::new(f), Arc::new(EmbeddingCache::in_memory()));
        g.embed("a", "m").unwrap();
        assert!(matches!(g.embed("b", "m"), Err(GatewayError::Decode(_))));
    }
}
