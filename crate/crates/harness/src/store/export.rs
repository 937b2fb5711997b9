use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};
use twinsim_core::QuestionDimension;

use super::{load_generations, read_jsonl, write_atomic, Corpus, CorpusFormat, GenerationFilter, Workspace};
use crate::error::{HarnessError, Result};

/// A generated answer next to the respondent's own answer. The gold text is
/// included even when the condition withheld it: export is evaluation-side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub persona_id: String,
    pub condition: String,
    pub question: String,
    pub generated_text: String,
    pub gold_text: Option<String>,
}

const HEADER: [&str; 5] = ["persona_id", "condition", "question", "generated_text", "gold_text"];

/// Writes every completed generation of a run; returns the row count.
pub fn export_responses(
    ws: &Workspace,
    run_id: &str,
    corpus: &Corpus,
    format: CorpusFormat,
    dest: &Path,
) -> Result<usize> {
    let filter = GenerationFilter { only_done: true, ..Default::default() };
    let by_id = corpus.by_id();
    let rows: Vec<ResponseRow> = load_generations(ws, run_id, &filter)?
        .into_iter()
        .map(|r| {
            let gold = by_id
                .get(r.cell.persona_id.as_str())
                .and_then(|p| p.gold_response(r.cell.question))
                .map(str::to_string);
            ResponseRow {
                generated_text: r.text().unwrap_or_default().to_string(),
                persona_id: r.cell.persona_id,
                condition: r.cell.condition.slug(),
                question: r.cell.question.slug().to_string(),
                gold_text: gold,
            }
        })
        .collect();

    let mut body = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for row in &rows {
                body.extend(serde_json::to_vec(row)?);
                body.push(b'\n');
            }
        }
        CorpusFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut body);
            w.write_record(HEADER)?;
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
    }
    write_atomic(dest, &body)?;
    Ok(rows.len())
}

pub fn read_responses(path: &Path, format: CorpusFormat) -> Result<Vec<ResponseRow>> {
    match format {
        CorpusFormat::Jsonl => read_jsonl(path),
        CorpusFormat::Csv => {
            let file = File::open(path).map_err(|e| HarnessError::unreadable(path, e))?;
            let mut reader = csv::Reader::from_reader(file);
            let mut out = Vec::new();
            for row in reader.deserialize::<ResponseRow>() {
                let mut row = row?;
                if row.gold_text.as_deref() == Some("") {
                    row.gold_text = None;
                }
                if QuestionDimension::from_slug(&row.question).is_none() {
                    return Err(HarnessError::SchemaMismatch(format!("unknown question `{}`", row.question)));
                }
                out.push(row);
            }
            Ok(out)
        }
    }
}
