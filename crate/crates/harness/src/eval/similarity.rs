use std::collections::BTreeMap;

use twinsim_core::metrics::{cosine_similarity, paired_t_test};
use twinsim_core::{ConditionGroup, QuestionDimension};
use twinsim_gateway::EmbeddingGateway;

use super::question_label;
use crate::error::Result;
use crate::report::{bold_column_maxima, Cell, Table};
use crate::store::{
    append_evaluations, load_generations, Corpus, EvalRecord, GenerationFilter, SimilaritySample, Workspace,
};

const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimilarityOutcome {
    pub samples: usize,
    /// Pairs whose embedding failed (empty text, input too long, provider error).
    pub skipped: usize,
}

/// Embeds each completed generation and its gold answer under every model
/// and stores their cosine similarity.
pub fn eval_similarity(
    ws: &Workspace,
    run_id: &str,
    corpus: &Corpus,
    models: &[String],
    gateway: &EmbeddingGateway,
    parallelism: usize,
) -> Result<SimilarityOutcome> {
    let by_id = corpus.by_id();
    let filter = GenerationFilter { only_done: true, ..Default::default() };
    let pairs: Vec<_> = load_generations(ws, run_id, &filter)?
        .into_iter()
        .filter_map(|r| {
            let gold = by_id.get(r.cell.persona_id.as_str())?.gold_response(r.cell.question)?.to_string();
            let text = r.text()?.to_string();
            Some((r.cell, text, gold))
        })
        .collect();

    let mut outcome = SimilarityOutcome::default();
    let mut records = vec![EvalRecord::SimilaritySet { models: models.to_vec() }];
    for model in models {
        let texts: Vec<String> = pairs.iter().flat_map(|(_, g, t)| [g.clone(), t.clone()]).collect();
        let vectors = gateway.embed_batch(&texts, model, parallelism);
        for (i, (cell, _, _)) in pairs.iter().enumerate() {
            let sim = match (&vectors[2 * i], &vectors[2 * i + 1]) {
                (Ok(a), Ok(b)) => cosine_similarity(a, b).map_err(|e| e.to_string()),
                (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
            };
            match sim {
                Ok(value) => {
                    outcome.samples += 1;
                    records.push(EvalRecord::Similarity(SimilaritySample {
                        persona_id: cell.persona_id.clone(),
                        condition: cell.condition,
                        question: cell.question,
                        embedding_model: model.clone(),
                        value,
                    }));
                }
                Err(e) => {
                    outcome.skipped += 1;
                    log::warn!("{}/{}/{} under {model}: {e}", cell.persona_id, cell.condition, cell.question.slug());
                }
            }
        }
    }
    append_evaluations(ws, run_id, &records)?;
    Ok(outcome)
}

type Samples = BTreeMap<(String, ConditionGroup, QuestionDimension), BTreeMap<String, f64>>;

fn mean(values: &BTreeMap<String, f64>) -> Option<f64> {
    (!values.is_empty()).then(|| values.values().sum::<f64>() / values.len() as f64)
}

/// Condition rows × (model × question) columns of mean similarity, with a
/// star where the row beats Zero-shot in a paired t-test, plus a long-form
/// table of the tests themselves.
pub fn similarity_tables(records: &[EvalRecord]) -> Vec<Table> {
    let Some(models) = records.iter().find_map(|r| match r {
        EvalRecord::SimilaritySet { models } => Some(models.clone()),
        _ => None,
    }) else {
        return Vec::new();
    };
    let mut samples: Samples = BTreeMap::new();
    for r in records {
        if let EvalRecord::Similarity(s) = r {
            if models.contains(&s.embedding_model) && s.condition.targets().contains(&s.question) {
                samples
                    .entry((s.embedding_model.clone(), s.condition.group(), s.question))
                    .or_default()
                    .insert(s.persona_id.clone(), s.value);
            }
        }
    }

    let mut header = vec!["Condition".to_string()];
    for m in &models {
        for q in QuestionDimension::REPORT_ORDER {
            header.push(format!("{m} {}", question_label(q)));
        }
    }
    let mut table = Table::new("similarity", "Mean cosine similarity to the respondent's answer", header);
    table.caption = Some(format!(
        "* significantly higher than Zero-shot (paired t-test over respondents, p < {ALPHA}). Bold: column maximum."
    ));
    let mut tests = Table::new(
        "similarity_tests",
        "Paired t-tests against Zero-shot",
        [
            "Condition",
            "Embedding model",
            "Question",
            "n",
            "Mean",
            "Zero-shot mean",
            "Mean difference",
            "t",
            "dof",
            "p",
            "Significant",
        ]
        .map(String::from)
        .to_vec(),
    );

    let empty = BTreeMap::new();
    for group in ConditionGroup::ALL {
        let mut row = vec![Cell::text(group.display_name())];
        for m in &models {
            for q in QuestionDimension::REPORT_ORDER {
                let cell_samples = samples.get(&(m.clone(), group, q)).unwrap_or(&empty);
                let mut star = false;
                if group != ConditionGroup::ZeroShot {
                    let base = samples.get(&(m.clone(), ConditionGroup::ZeroShot, q)).unwrap_or(&empty);
                    let (x, y): (Vec<f64>, Vec<f64>) =
                        cell_samples.iter().filter_map(|(p, v)| base.get(p).map(|b| (*v, *b))).unzip();
                    if let Ok(t) = paired_t_test(&x, &y) {
                        star = t.p_two_sided < ALPHA && t.mean_difference > 0.0;
                        tests.rows.push(vec![
                            Cell::text(group.display_name()),
                            Cell::text(m.clone()),
                            Cell::text(question_label(q)),
                            Cell::text(t.n_pairs.to_string()),
                            Cell::num(Some(x.iter().sum::<f64>() / x.len() as f64)),
                            Cell::num(Some(y.iter().sum::<f64>() / y.len() as f64)),
                            Cell::num(Some(t.mean_difference)),
                            Cell::num(Some(t.t_stat)),
                            Cell::text(t.dof.to_string()),
                            Cell::num(Some(t.p_two_sided)),
                            Cell::text(if star { "yes" } else { "no" }),
                        ]);
                    }
                }
                row.push(Cell::Number { value: mean(cell_samples), star, bold: false });
            }
        }
        table.rows.push(row);
    }
    bold_column_maxima(&mut table);
    vec![table, tests]
}
