//! On-disk layout under one output directory:
//!
//! ```text
//! <out>/corpus/{personas.jsonl, rejects.jsonl, summary.json}
//! <out>/cache/{generations.jsonl, embeddings.jsonl}
//! <out>/runs/<run_id>/{manifest.json, generations.jsonl, evaluations.jsonl, reports/}
//! ```

mod corpus;
mod evals;
mod export;
mod runs;

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

pub use corpus::{
    export_corpus, ingest, load_corpus, read_raw_rows, Corpus, CorpusFormat, IngestSummary, RejectRecord,
};
pub use evals::{
    append_evaluations, load_evaluations, EvalRecord, FairnessRow, RougeSample, SimilaritySample, TraitRating,
};
pub use export::{export_responses, read_responses, ResponseRow};
pub use runs::{
    load_generations, load_manifest, run_id_for, save_generation, write_manifest, CellError, CellId, CellRecord,
    CellStatus, GenerationFilter, GenerationLog, ManifestCell, RunManifest,
};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.root.join("corpus")
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn generation_cache_path(&self) -> PathBuf {
        self.cache_dir().join("generations.jsonl")
    }

    pub fn embedding_cache_path(&self) -> PathBuf {
        self.cache_dir().join("embeddings.jsonl")
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.runs_dir().join(run_id)
    }

    pub fn reports_dir(&self, run_id: Option<&str>) -> PathBuf {
        match run_id {
            Some(id) => self.run_dir(id).join("reports"),
            None => self.root.join("reports"),
        }
    }

    /// Fails with `UnknownRun` unless the run has a manifest.
    pub fn existing_run_dir(&self, run_id: &str) -> Result<PathBuf> {
        let dir = self.run_dir(run_id);
        if run_id.is_empty() || run_id.contains(['/', '\\']) || !dir.join("manifest.json").is_file() {
            return Err(HarnessError::UnknownRun(run_id.to_string()));
        }
        Ok(dir)
    }

    /// Run ids with a manifest, sorted.
    pub fn list_runs(&self) -> Result<Vec<String>> {
        let mut out = Vec::new();
        let dir = self.runs_dir();
        if !dir.is_dir() {
            return Ok(out);
        }
        for entry in fs::read_dir(&dir)? {
            let entry = entry?;
            if entry.path().join("manifest.json").is_file() {
                out.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        out.sort();
        Ok(out)
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes via a temporary sibling and rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Appends one JSON line with a single write.
pub(crate) fn append_line(file: &mut File, value: &impl serde::Serialize) -> Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    file.write_all(&line)?;
    Ok(())
}

pub(crate) fn open_append(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(OpenOptions::new().create(true).append(true).open(path)?)
}

/// Reads JSONL, skipping blank and unparsable lines (a torn final append).
pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::unreadable(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(v) => out.push(v),
            Err(e) => log::warn!("{}:{}: skipping unreadable line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}
