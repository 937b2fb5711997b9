//! Evaluations over stored runs. Each `eval_*` function appends per-sample
//! rows to the run's evaluation log; [`render_reports`] turns that log into
//! tables without touching any provider.

mod fairness;
mod rouge;
mod similarity;
mod traits;

use std::path::PathBuf;

pub use fairness::{
    eval_fairness, fairness_rows, fairness_tables, read_metrics_csv, read_predictions, PredictionLine, DEFAULT_BASELINE,
};
pub use rouge::{eval_rouge, rouge_table};
pub use similarity::{eval_similarity, similarity_tables, SimilarityOutcome};
pub use traits::{eval_traits, parse_trait_ratings, trait_messages, trait_table, TraitOutcome};
use twinsim_core::QuestionDimension;

use crate::error::Result;
use crate::report::Table;
use crate::store::{load_evaluations, Workspace};

/// Column label used by the similarity table.
pub fn question_label(q: QuestionDimension) -> &'static str {
    match q {
        QuestionDimension::Anxiety => "Anxiety",
        QuestionDimension::Numeracy => "Numeracy",
        QuestionDimension::SubjectiveLit => "Lit",
        QuestionDimension::TrustPhys => "TrustPhys",
    }
}

/// Every table derivable from the run's stored evaluations.
pub fn run_tables(ws: &Workspace, run_id: &str) -> Result<Vec<Table>> {
    let records = load_evaluations(ws, run_id)?;
    let mut tables = similarity_tables(&records);
    tables.extend(rouge_table(&records));
    tables.extend(trait_table(&records));
    if let Some((baseline, rows)) = fairness::stored_rows(&records) {
        tables.extend(fairness_tables(rows, baseline));
    }
    Ok(tables)
}

/// Re-renders all reports of a run into `<run>/reports/`.
pub fn render_reports(ws: &Workspace, run_id: &str, precision: usize) -> Result<Vec<PathBuf>> {
    let dir = ws.reports_dir(Some(run_id));
    let mut paths = Vec::new();
    for t in run_tables(ws, run_id)? {
        paths.extend(t.write(&dir, precision)?);
    }
    Ok(paths)
}
