use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use twinsim_core::metrics::Prf;
use twinsim_core::persona::BigFiveTrait;
use twinsim_core::{Condition, ConditionGroup, QuestionDimension};

use super::{append_line, open_append, read_jsonl, Workspace};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySample {
    pub persona_id: String,
    pub condition: Condition,
    pub question: QuestionDimension,
    pub embedding_model: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeSample {
    pub persona_id: String,
    pub condition: Condition,
    pub question: QuestionDimension,
    pub rouge1: Prf,
    pub rouge_l: Prf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitRating {
    pub persona_id: String,
    pub group: ConditionGroup,
    pub model_id: String,
    /// Self-reported levels, copied so reports need not reload the corpus.
    pub gold: BTreeMap<BigFiveTrait, u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<BTreeMap<BigFiveTrait, u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One downstream-metrics row; values align with `FairnessMetrics::COLUMNS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessRow {
    pub condition: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub values: [Option<f64>; 11],
}

/// One line of a run's evaluation log. `*Set` records say which models or
/// baseline the latest evaluation used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalRecord {
    SimilaritySet { models: Vec<String> },
    Similarity(SimilaritySample),
    Rouge(RougeSample),
    Trait(TraitRating),
    FairnessSet { baseline: String, rows: Vec<FairnessRow> },
}

impl EvalRecord {
    /// Later records with the same key replace earlier ones.
    fn key(&self) -> String {
        match self {
            EvalRecord::SimilaritySet { .. } => "similarity_set".into(),
            EvalRecord::Similarity(s) => {
                format!("sim\0{}\0{}\0{}\0{}", s.persona_id, s.condition, s.question.slug(), s.embedding_model)
            }
            EvalRecord::Rouge(s) => format!("rouge\0{}\0{}\0{}", s.persona_id, s.condition, s.question.slug()),
            EvalRecord::Trait(t) => format!("trait\0{}\0{:?}\0{}", t.persona_id, t.group, t.model_id),
            EvalRecord::FairnessSet { .. } => "fairness_set".into(),
        }
    }
}

pub fn append_evaluations(ws: &Workspace, run_id: &str, records: &[EvalRecord]) -> Result<()> {
    let dir = ws.existing_run_dir(run_id)?;
    let mut f = open_append(&dir.join("evaluations.jsonl"))?;
    for r in records {
        append_line(&mut f, r)?;
    }
    Ok(())
}

/// Latest record per key, ordered by key, so the result does not depend on
/// the order in which evaluations were appended.
pub fn load_evaluations(ws: &Workspace, run_id: &str) -> Result<Vec<EvalRecord>> {
    let dir = ws.existing_run_dir(run_id)?;
    let mut latest = BTreeMap::new();
    for r in read_jsonl::<EvalRecord>(&dir.join("evaluations.jsonl"))? {
        latest.insert(r.key(), r);
    }
    Ok(latest.into_values().collect())
}
