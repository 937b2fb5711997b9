//! Chat-completion gateway with a content-addressed record/replay cache.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use twinsim_core::{build_chat_messages, ChatMessage, QuestionDimension, TemplateMapping, TwinState};

use crate::batch::parallel_map;
use crate::client::{Endpoint, GatewayStats, ProviderClient};
use crate::error::GatewayError;
use crate::retry::{RetryPolicy, Sleeper};
use crate::transport::Transport;

/// Sampling parameters for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_id: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Recorded for provenance; not sent, since the chat protocol has no such field.
    pub min_tokens: u32,
    /// Part of the cache key but never sent. Set it to keep otherwise
    /// identical requests apart, e.g. one independent sample per respondent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_note: Option<String>,
}

impl GenerationConfig {
    /// Defaults used with the OpenAI API: temperature 0.6, top_p 1, 200 tokens.
    pub fn openai_defaults(model_id: impl Into<String>) -> Self {
        GenerationConfig {
            model_id: model_id.into(),
            temperature: 0.6,
            top_p: 1.0,
            max_tokens: 200,
            min_tokens: 0,
            seed_note: None,
        }
    }

    /// Defaults used with hosted open-weight models: as above but top_p 0.9.
    pub fn open_weight_defaults(model_id: impl Into<String>) -> Self {
        GenerationConfig { top_p: 0.9, ..Self::openai_defaults(model_id) }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if self.model_id.trim().is_empty() {
            return bad("model_id is empty");
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad("temperature must lie in [0, 2]");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.max_tokens < self.min_tokens {
            return bad("max_tokens must be >= min_tokens");
        }
        Ok(())
    }

    /// Wire body for the chat-completions endpoint.
    pub fn request_body(&self, messages: &[ChatMessage]) -> serde_json::Value {
        json!({
            "model": self.model_id,
            "messages": messages,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
        })
    }
}

/// Hex SHA-256 over the model, the full config and every message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    kind: &'static str,
    config: &'a GenerationConfig,
    messages: &'a [ChatMessage],
}

pub fn cache_key(messages: &[ChatMessage], cfg: &GenerationConfig) -> CacheKey {
    let material = KeyMaterial { kind: "chat.v1", config: cfg, messages };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    CacheKey(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    /// Serve from cache when possible, otherwise call the provider and record.
    Live,
    /// Serve from cache only.
    Replay,
}

impl FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(BackendMode::Live),
            "replay" => Ok(BackendMode::Replay),
            other => Err(format!("unknown backend `{other}` (expected live or replay)")),
        }
    }
}

impl fmt::Display for BackendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendMode::Live => "live",
            BackendMode::Replay => "replay",
        })
    }
}

/// How a particular response was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub messages: Vec<ChatMessage>,
    pub config: GenerationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub cache_key: CacheKey,
    pub request: GenerationRequest,
    pub response_text: String,
    pub latency_ms: u64,
    pub backend: Backend,
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub retry_count: u32,
}

/// Append-only JSONL store keyed by [`CacheKey`]. The first record written
/// for a key wins; later duplicates are ignored.
pub struct GenerationCache {
    path: Option<PathBuf>,
    records: RwLock<HashMap<CacheKey, GenerationRecord>>,
    writer: Mutex<Option<File>>,
    skipped_lines: usize,
}

/// Opens `path` for appending, first terminating a torn final line so the
/// next append starts on a fresh line.
pub(crate) fn open_append(path: &Path) -> Result<File, GatewayError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut file = OpenOptions::new().create(true).read(true).append(true).open(path)?;
    let len = file.metadata()?.len();
    if len > 0 {
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1))?;
        file.read_exact(&mut last)?;
        if last[0] != b'\n' {
            file.write_all(b"\n")?;
        }
    }
    Ok(file)
}

impl GenerationCache {
    pub fn in_memory() -> Self {
        GenerationCache { path: None, records: RwLock::new(HashMap::new()), writer: Mutex::new(None), skipped_lines: 0 }
    }

    /// Loads existing records and opens the file for appending. Lines that do
    /// not parse (e.g. a write torn by a crash) are skipped and counted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let mut records = HashMap::new();
        let mut skipped = 0;
        if path.exists() {
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<GenerationRecord>(&line) {
                    Ok(r) => {
                        records.entry(r.cache_key.clone()).or_insert(r);
                    }
                    Err(e) => {
                        log::warn!("{}: skipping unreadable cache line: {e}", path.display());
                        skipped += 1;
                    }
                }
            }
        }
        let file = open_append(&path)?;
        Ok(GenerationCache {
            path: Some(path),
            records: RwLock::new(records),
            writer: Mutex::new(Some(file)),
            skipped_lines: skipped,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn get(&self, key: &CacheKey) -> Option<GenerationRecord> {
        self.records.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records, ordered by key.
    pub fn records(&self) -> Vec<GenerationRecord> {
        let mut out: Vec<_> = self.records.read().unwrap().values().cloned().collect();
        out.sort_by(|a, b| a.cache_key.cmp(&b.cache_key));
        out
    }

    /// Persists `record` unless its key is already present. Returns whether
    /// it was written.
    pub fn insert(&self, record: GenerationRecord) -> Result<bool, GatewayError> {
        let mut writer = self.writer.lock().unwrap();
        if self.records.read().unwrap().contains_key(&record.cache_key) {
            return Ok(false);
        }
        if let Some(file) = writer.as_mut() {
            let mut line = serde_json::to_string(&record).map_err(|e| GatewayError::Cache(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        self.records.write().unwrap().insert(record.cache_key.clone(), record);
        Ok(true)
    }
}

/// Result of re-reading a cache file and re-deriving every key.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CacheAudit {
    pub records: usize,
    pub unreadable_lines: Vec<usize>,
    /// Keys whose stored request hashes to something else.
    pub key_mismatches: Vec<String>,
    pub duplicate_keys: usize,
}

impl CacheAudit {
    pub fn is_clean(&self) -> bool {
        self.unreadable_lines.is_empty() && self.key_mismatches.is_empty()
    }
}

pub fn audit_generation_cache(path: &Path) -> Result<CacheAudit, GatewayError> {
    let mut audit = CacheAudit::default();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<GenerationRecord>(&line) {
            Ok(r) => {
                audit.records += 1;
                if cache_key(&r.request.messages, &r.request.config) != r.cache_key {
                    audit.key_mismatches.push(r.cache_key.0.clone());
                }
                if !seen.insert(r.cache_key) {
                    audit.duplicate_keys += 1;
                }
            }
            Err(_) => audit.unreadable_lines.push(i + 1),
        }
    }
    Ok(audit)
}

/// The model call `G(.)`: turns a chat transcript into assistant text.
pub struct ChatGateway {
    mode: BackendMode,
    client: ProviderClient,
    cache: Arc<GenerationCache>,
}

impl ChatGateway {
    pub fn new(
        mode: BackendMode,
        endpoint: Endpoint,
        transport: Arc<dyn Transport>,
        cache: Arc<GenerationCache>,
    ) -> Self {
        ChatGateway { mode, client: ProviderClient::new(endpoint, transport), cache }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.client.retry = retry;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.client.set_sleeper(sleeper);
        self
    }

    /// Upper bound on concurrent provider requests.
    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.client.set_max_in_flight(n);
        self
    }

    pub fn mode(&self) -> BackendMode {
        self.mode
    }

    pub fn stats(&self) -> &GatewayStats {
        &self.client.stats
    }

    pub fn cache(&self) -> &GenerationCache {
        &self.cache
    }

    pub fn complete(&self, messages: &[ChatMessage], cfg: &GenerationConfig) -> Result<GenerationRecord, GatewayError> {
        if messages.is_empty() {
            return Err(GatewayError::EmptyMessages);
        }
        cfg.validate()?;
        let key = cache_key(messages, cfg);
        if let Some(mut hit) = self.cache.get(&key) {
            self.client.stats.record_cache_hit();
            hit.backend = Backend::Replay;
            return Ok(hit);
        }
        if self.mode == BackendMode::Replay {
            return Err(GatewayError::ReplayMiss(key.0));
        }

        let started = Instant::now();
        let delivered = self.client.post(cfg.request_body(messages))?;
        let text = delivered.body["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::Decode("response has no choices[0].message.content".into()))?
            .to_string();
        let record = GenerationRecord {
            cache_key: key,
            request: GenerationRequest { messages: messages.to_vec(), config: cfg.clone() },
            response_text: text,
            latency_ms: started.elapsed().as_millis() as u64,
            backend: Backend::Live,
            timestamp: Utc::now(),
            retry_count: delivered.retries,
        };
        self.cache.insert(record.clone())?;
        Ok(record)
    }

    pub fn complete_text(&self, messages: &[ChatMessage], cfg: &GenerationConfig) -> Result<String, GatewayError> {
        self.complete(messages, cfg).map(|r| r.response_text)
    }

    /// Runs every request on up to `parallelism` threads; results keep input
    /// order and failures stay per item.
    pub fn complete_batch<D>(
        &self,
        requests: &[GenerationRequest],
        parallelism: usize,
        on_done: D,
    ) -> Vec<Result<GenerationRecord, GatewayError>>
    where
        D: Fn(usize, &Result<GenerationRecord, GatewayError>) + Sync,
    {
        parallel_map(requests, parallelism, |_, r| self.complete(&r.messages, &r.config), on_done)
    }

    /// Builds the transcript for each `(twin, target)` pair and completes it.
    pub fn run_generation_batch(
        &self,
        plans: &[(TwinState, QuestionDimension)],
        mapping: &TemplateMapping,
        cfg: &GenerationConfig,
        parallelism: usize,
    ) -> Vec<Result<GenerationRecord, GatewayError>> {
        parallel_map(
            plans,
            parallelism,
            |_, (twin, target)| {
                let messages = build_chat_messages(twin, *target, mapping)
                    .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
                self.complete(&messages, cfg)
            },
            |_, _| {},
        )
    }
}
