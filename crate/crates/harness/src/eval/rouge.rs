use std::collections::BTreeMap;

use twinsim_core::metrics::{rouge_l, rouge_n};
use twinsim_core::{ConditionGroup, QuestionDimension};

use crate::error::Result;
use crate::report::{Cell, Table};
use crate::store::{
    append_evaluations, load_generations, Corpus, EvalRecord, GenerationFilter, RougeSample, Workspace,
};

/// Scores each completed generation against its gold answer; returns the
/// number of samples stored.
pub fn eval_rouge(ws: &Workspace, run_id: &str, corpus: &Corpus) -> Result<usize> {
    let by_id = corpus.by_id();
    let filter = GenerationFilter { only_done: true, ..Default::default() };
    let records: Vec<EvalRecord> = load_generations(ws, run_id, &filter)?
        .into_iter()
        .filter_map(|r| {
            let gold = by_id.get(r.cell.persona_id.as_str())?.gold_response(r.cell.question)?;
            let text = r.text()?;
            Some(EvalRecord::Rouge(RougeSample {
                rouge1: rouge_n(text, gold, 1),
                rouge_l: rouge_l(text, gold),
                persona_id: r.cell.persona_id,
                condition: r.cell.condition,
                question: r.cell.question,
            }))
        })
        .collect();
    append_evaluations(ws, run_id, &records)?;
    Ok(records.len())
}

/// Two rows per condition (ROUGE-1 F1, ROUGE-L F1), one column per question.
pub fn rouge_table(records: &[EvalRecord]) -> Option<Table> {
    let mut sums: BTreeMap<(ConditionGroup, QuestionDimension), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        if let EvalRecord::Rouge(s) = r {
            if s.condition.targets().contains(&s.question) {
                let e = sums.entry((s.condition.group(), s.question)).or_default();
                e.0 += s.rouge1.f1;
                e.1 += s.rouge_l.f1;
                e.2 += 1;
            }
        }
    }
    if sums.is_empty() {
        return None;
    }
    let mut header = vec!["Condition".to_string(), "ROUGE".to_string()];
    header.extend(QuestionDimension::REPORT_ORDER.iter().map(|q| q.abbreviation().to_string()));
    let mut table = Table::new("rouge", "ROUGE-1 and ROUGE-L F1 against the respondent's answer", header);
    table.caption = Some("A: Anxiety, N: Numeracy, SL: Subjective health literacy, TP: Trust in physician".into());
    for group in ConditionGroup::ALL {
        for (label, pick) in [("1", 0usize), ("L", 1)] {
            let mut row = vec![Cell::text(group.display_name()), Cell::text(label)];
            for q in QuestionDimension::REPORT_ORDER {
                let v = sums.get(&(group, q)).map(|(r1, rl, n)| if pick == 0 { r1 } else { rl } / *n as f64);
                row.push(Cell::num(v));
            }
            table.rows.push(row);
        }
    }
    Some(table)
}
