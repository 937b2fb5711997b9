use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use twinsim_core::{Condition, QuestionDimension};
use twinsim_gateway::{BackendMode, GatewayError, GenerationConfig, GenerationRecord};

use super::{append_line, open_append, read_jsonl, sha256_hex, write_atomic, Workspace};
use crate::error::{HarnessError, Result};

/// One (persona, condition, target question) generation slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub persona_id: String,
    pub condition: Condition,
    pub question: QuestionDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCell {
    #[serde(flatten)]
    pub cell: CellId,
    pub status: CellStatus,
}

/// Everything needed to re-execute a run: the same inputs give the same
/// run id and the same cache keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub corpus_hash: String,
    pub conditions: Vec<Condition>,
    pub profile: String,
    pub model_id: String,
    pub config: GenerationConfig,
    pub mapping_version: String,
    /// Backend of the most recent execution.
    pub backend: BackendMode,
    pub created_at: String,
    pub cells: Vec<ManifestCell>,
}

impl RunManifest {
    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

/// Deterministic id from the inputs that shape every request. The backend
/// is deliberately excluded so a replay of a live run lands in the same place.
pub fn run_id_for(
    corpus_hash: &str,
    conditions: &[Condition],
    config: &GenerationConfig,
    mapping_version: &str,
) -> String {
    let doc = serde_json::json!({
        "corpus": corpus_hash,
        "conditions": conditions.iter().map(|c| c.slug()).collect::<Vec<_>>(),
        "config": config,
        "mapping": mapping_version,
    });
    sha256_hex(doc.to_string().as_bytes())[..16].to_string()
}

pub fn write_manifest(ws: &Workspace, manifest: &RunManifest) -> Result<()> {
    let path = ws.run_dir(&manifest.run_id).join("manifest.json");
    let mut body = serde_json::to_vec_pretty(manifest)?;
    body.push(b'\n');
    write_atomic(&path, &body)
}

pub fn load_manifest(ws: &Workspace, run_id: &str) -> Result<RunManifest> {
    let path = ws.existing_run_dir(run_id)?.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::unreadable(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellError {
    pub kind: String,
    pub message: String,
}

impl From<&GatewayError> for CellError {
    fn from(e: &GatewayError) -> Self {
        CellError { kind: e.kind().to_string(), message: e.to_string() }
    }
}

/// One line of a run's generation log: either the generation or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(flatten)]
    pub cell: CellId,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<GenerationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<CellError>,
}

impl CellRecord {
    pub fn is_done(&self) -> bool {
        self.record.is_some()
    }

    pub fn text(&self) -> Option<&str> {
        self.record.as_ref().map(|r| r.response_text.as_str())
    }
}

/// Append handle for a run's generation log; safe to share between threads.
pub struct GenerationLog {
    file: Mutex<File>,
}

impl GenerationLog {
    pub fn open(ws: &Workspace, run_id: &str) -> Result<Self> {
        let dir = ws.existing_run_dir(run_id)?;
        Ok(GenerationLog { file: Mutex::new(open_append(&dir.join("generations.jsonl"))?) })
    }

    pub fn append(&self, record: &CellRecord) -> Result<()> {
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        append_line(&mut f, record)
    }
}

pub fn save_generation(ws: &Workspace, run_id: &str, record: &CellRecord) -> Result<()> {
    GenerationLog::open(ws, run_id)?.append(record)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationFilter {
    pub persona_id: Option<String>,
    pub condition: Option<Condition>,
    pub question: Option<QuestionDimension>,
    pub only_done: bool,
}

impl GenerationFilter {
    pub fn matches(&self, r: &CellRecord) -> bool {
        self.persona_id.as_ref().is_none_or(|p| *p == r.cell.persona_id)
            && self.condition.is_none_or(|c| c == r.cell.condition)
            && self.question.is_none_or(|q| q == r.cell.question)
            && (!self.only_done || r.is_done())
    }
}

/// Latest record per cell, in (persona_id, condition, question) order.
pub fn load_generations(ws: &Workspace, run_id: &str, filter: &GenerationFilter) -> Result<Vec<CellRecord>> {
    let dir = ws.existing_run_dir(run_id)?;
    Ok(latest_per_cell(&dir.join("generations.jsonl"))?.into_values().filter(|r| filter.matches(r)).collect())
}

fn latest_per_cell(path: &Path) -> Result<BTreeMap<CellId, CellRecord>> {
    let mut out = BTreeMap::new();
    for r in read_jsonl::<CellRecord>(path)? {
        out.insert(r.cell.clone(), r);
    }
    Ok(out)
}
