//! Declarative harness configuration (TOML).
//!
//! Credentials never live here: endpoints name the environment variable that
//! holds the key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinsim_core::fairness::BinarizationPolicy;
use twinsim_core::TemplateMapping;
use twinsim_gateway::{Endpoint, GenerationConfig, RetryPolicy};

use crate::error::{HarnessError, Result};

/// One generation model and where to reach it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub endpoint: Endpoint,
    #[serde(flatten)]
    pub generation: GenerationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSettings {
    /// Embedding models evaluated side by side, in report column order.
    pub models: Vec<String>,
    pub endpoint: Option<Endpoint>,
    /// Local JSONL text→vector table used instead of the endpoint.
    pub fixture: Option<PathBuf>,
    /// Per-model maximum input length in characters; longer texts are errors.
    pub input_limits: BTreeMap<String, usize>,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            models: vec!["bert-base-uncased".into(), "all-MiniLM-L6-v2".into(), "all-mpnet-base-v2".into()],
            endpoint: Some(Endpoint {
                base_url: "http://127.0.0.1:8080".into(),
                path: "/v1/embeddings".into(),
                api_key_env: None,
                timeout_secs: 60,
            }),
            fixture: None,
            input_limits: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarnessConfig {
    pub default_profile: String,
    pub profiles: BTreeMap<String, ModelProfile>,
    pub embeddings: EmbeddingSettings,
    pub policy: BinarizationPolicy,
    pub retry: RetryPolicy,
    /// Phrase-table file; the built-in table when absent.
    pub mapping_path: Option<PathBuf>,
    /// Upper bound on concurrent provider requests per gateway.
    pub max_in_flight: usize,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn builtin_profiles() -> BTreeMap<String, ModelProfile> {
    let openai = ModelProfile {
        endpoint: Endpoint {
            base_url: "https://api.openai.com".into(),
            path: "/v1/chat/completions".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            timeout_secs: 60,
        },
        generation: GenerationConfig::openai_defaults("gpt-4o"),
    };
    let llama = ModelProfile {
        endpoint: Endpoint {
            base_url: "http://127.0.0.1:8000".into(),
            path: "/v1/chat/completions".into(),
            api_key_env: Some("LLAMA_API_KEY".into()),
            timeout_secs: 120,
        },
        generation: GenerationConfig::open_weight_defaults("llama-3-70b"),
    };
    BTreeMap::from([("gpt-4o".to_string(), openai), ("llama-3-70b".to_string(), llama)])
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            default_profile: "gpt-4o".into(),
            profiles: builtin_profiles(),
            embeddings: EmbeddingSettings::default(),
            policy: BinarizationPolicy::default(),
            retry: RetryPolicy::default(),
            mapping_path: None,
            max_in_flight: 8,
            base_dir: PathBuf::from("."),
        }
    }
}

impl HarnessConfig {
    /// Parses a config document; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: HarnessConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::unreadable(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    fn validate(&self) -> Result<()> {
        if self.max_in_flight == 0 {
            return Err(HarnessError::Config("max_in_flight must be at least 1".into()));
        }
        for (name, p) in &self.profiles {
            p.generation.validate().map_err(|e| HarnessError::Config(format!("profile `{name}`: {e}")))?;
        }
        if self.embeddings.models.is_empty() {
            return Err(HarnessError::Config("embeddings.models is empty".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn profile(&self, name: Option<&str>) -> Result<&ModelProfile> {
        let name = name.unwrap_or(&self.default_profile);
        self.profiles.get(name).ok_or_else(|| {
            let known: Vec<_> = self.profiles.keys().map(String::as_str).collect();
            HarnessError::Usage(format!("unknown profile `{name}` (known: {})", known.join(", ")))
        })
    }

    pub fn mapping(&self) -> Result<TemplateMapping> {
        match &self.mapping_path {
            None => Ok(TemplateMapping::builtin()),
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::unreadable(&path, e))?;
                Ok(TemplateMapping::from_toml_str(&text)?)
            }
        }
    }
}
