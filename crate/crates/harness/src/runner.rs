//! Executes a run: plan every (persona, condition), materialize the twin from
//! the revealed answers, and generate each target question.
//!
//! Runs are resumable. Every request is resubmitted through the gateway, so
//! cells finished earlier come back as cache hits; only cells without a
//! stored generation are appended to the run's log.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use twinsim_core::{build_chat_messages, materialize_twin, plan_condition, Condition, TemplateMapping};
use twinsim_gateway::{ChatGateway, GenerationRecord, GenerationRequest};

use crate::config::ModelProfile;
use crate::error::Result;
use crate::store::{
    load_generations, load_manifest, run_id_for, write_manifest, CellError, CellId, CellRecord, CellStatus, Corpus,
    GenerationFilter, GenerationLog, ManifestCell, RunManifest, Workspace,
};

pub struct RunRequest<'a> {
    pub corpus: &'a Corpus,
    pub conditions: Vec<Condition>,
    pub profile_name: String,
    pub profile: &'a ModelProfile,
    pub mapping: &'a TemplateMapping,
    pub parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub run_id: String,
    pub total: usize,
    pub done: usize,
    pub failed: usize,
    /// Cells that already had a generation when this execution started.
    pub previously_done: usize,
}

/// Sample discriminator: identical prompts for different cells stay distinct
/// in the cache and so are independent draws.
pub fn cell_seed_note(cell: &CellId) -> String {
    format!("{}/{}/{}", cell.persona_id, cell.condition, cell.question.slug())
}

enum Planned {
    Request(GenerationRequest),
    Failed(CellError),
}

fn plan_cells(req: &RunRequest<'_>) -> BTreeMap<CellId, Planned> {
    let mut out = BTreeMap::new();
    for record in &req.corpus.records {
        for &condition in &req.conditions {
            let cell = |question| CellId { persona_id: record.id.clone(), condition, question };
            let twin = plan_condition(condition, record).and_then(|plan| materialize_twin(&plan, record, req.mapping));
            let twin = match twin {
                Ok(t) => t,
                Err(e) => {
                    for q in condition.targets() {
                        let err = CellError { kind: "TwinError".into(), message: e.to_string() };
                        out.insert(cell(q), Planned::Failed(err));
                    }
                    continue;
                }
            };
            for q in condition.targets() {
                let id = cell(q);
                let planned = match build_chat_messages(&twin, q, req.mapping) {
                    Ok(messages) => {
                        let mut config = req.profile.generation.clone();
                        config.seed_note = Some(cell_seed_note(&id));
                        Planned::Request(GenerationRequest { messages, config })
                    }
                    Err(e) => Planned::Failed(CellError { kind: "TwinError".into(), message: e.to_string() }),
                };
                out.insert(id, planned);
            }
        }
    }
    out
}

pub fn execute_run(ws: &Workspace, req: &RunRequest<'_>, gateway: &ChatGateway) -> Result<RunSummary> {
    let cfg = &req.profile.generation;
    let run_id = run_id_for(&req.corpus.hash, &req.conditions, cfg, &req.mapping.version);
    let planned = plan_cells(req);

    let (created_at, previous) = match load_manifest(ws, &run_id) {
        Ok(m) => (m.created_at, load_generations(ws, &run_id, &GenerationFilter::default())?),
        Err(_) => (chrono::Utc::now().to_rfc3339(), Vec::new()),
    };
    let already_done: BTreeMap<CellId, bool> = previous.iter().map(|r| (r.cell.clone(), r.is_done())).collect();
    let is_done = |c: &CellId| already_done.get(c).copied().unwrap_or(false);

    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        corpus_hash: req.corpus.hash.clone(),
        conditions: req.conditions.clone(),
        profile: req.profile_name.clone(),
        model_id: cfg.model_id.clone(),
        config: cfg.clone(),
        mapping_version: req.mapping.version.clone(),
        backend: gateway.mode(),
        created_at,
        cells: planned
            .keys()
            .map(|c| ManifestCell {
                cell: c.clone(),
                status: if is_done(c) { CellStatus::Done } else { CellStatus::Pending },
            })
            .collect(),
    };
    write_manifest(ws, &manifest)?;
    let log = GenerationLog::open(ws, &run_id)?;

    let record_of = |cell: &CellId, result: std::result::Result<GenerationRecord, CellError>| {
        let (record, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e)),
        };
        CellRecord { cell: cell.clone(), model_id: cfg.model_id.clone(), record, error }
    };

    let mut statuses: BTreeMap<CellId, CellStatus> = BTreeMap::new();
    let mut requests = Vec::new();
    let mut request_cells = Vec::new();
    for (cell, p) in &planned {
        match p {
            Planned::Request(r) => {
                requests.push(r.clone());
                request_cells.push(cell.clone());
            }
            Planned::Failed(e) => {
                if !is_done(cell) {
                    log.append(&record_of(cell, Err(e.clone())))?;
                }
                statuses.insert(cell.clone(), CellStatus::Failed);
            }
        }
    }

    let write_errors = AtomicUsize::new(0);
    let results = gateway.complete_batch(&requests, req.parallelism, |i, result| {
        let cell = &request_cells[i];
        if is_done(cell) {
            return;
        }
        let rec = record_of(cell, result.clone().map_err(|e| CellError::from(&e)));
        if let Err(e) = log.append(&rec) {
            log::error!("cannot record {}: {e}", crate::runner::cell_seed_note(cell));
            write_errors.fetch_add(1, Ordering::SeqCst);
        }
    });
    if write_errors.load(Ordering::SeqCst) > 0 {
        return Err(std::io::Error::other("failed to append generation records").into());
    }
    for (cell, result) in request_cells.iter().zip(&results) {
        let status = if is_done(cell) || result.is_ok() { CellStatus::Done } else { CellStatus::Failed };
        statuses.insert(cell.clone(), status);
    }

    for c in &mut manifest.cells {
        c.status = statuses[&c.cell];
    }
    write_manifest(ws, &manifest)?;
    Ok(RunSummary {
        run_id,
        total: manifest.cells.len(),
        done: manifest.count(CellStatus::Done),
        failed: manifest.count(CellStatus::Failed),
        previously_done: already_done.values().filter(|d| **d).count(),
    })
}
