//! Downstream metrics and disparate impact for externally produced
//! predictions, and lifts over a baseline condition.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twinsim_core::fairness::{
    fairness_metrics, lift_percent, BinarizationPolicy, FairnessMetrics, LabeledPrediction, LiftMetric,
};

use crate::error::{HarnessError, Result};
use crate::report::{Cell, Table};
use crate::store::{append_evaluations, Corpus, EvalRecord, FairnessRow, Workspace};

pub const DEFAULT_BASELINE: &str = "Zero-shot";

/// One line of a predictions file. Rows without a condition or model fall
/// into the `all` / `-` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub persona_id: String,
    pub score: f64,
    pub predicted_positive: bool,
    pub gold: f64,
    #[serde(default)]
    pub condition: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionLine>> {
    let file = File::open(path).map_err(|e| HarnessError::unreadable(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = serde_json::from_str(&line)
            .map_err(|e| HarnessError::SchemaMismatch(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// Groups predictions by (condition, model) in order of first appearance,
/// joins demographics from the corpus and computes one row per group.
pub fn fairness_rows(
    preds: &[PredictionLine],
    corpus: &Corpus,
    policy: &BinarizationPolicy,
) -> Result<Vec<FairnessRow>> {
    let by_id = corpus.by_id();
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<LabeledPrediction>> = BTreeMap::new();
    for p in preds {
        let record =
            by_id.get(p.persona_id.as_str()).ok_or_else(|| HarnessError::UnknownPersona(p.persona_id.clone()))?;
        let key = (p.condition.clone().unwrap_or_else(|| "all".into()), p.model.clone().unwrap_or_else(|| "-".into()));
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(LabeledPrediction {
            persona_id: p.persona_id.clone(),
            score: p.score,
            predicted_positive: p.predicted_positive,
            gold: p.gold,
            demographics: record.demographic.clone(),
        });
    }
    order
        .into_iter()
        .map(|key| {
            let m = fairness_metrics(&groups[&key], policy)?;
            Ok(FairnessRow { n: Some(m.n), values: m.values(), condition: key.0, model: key.1 })
        })
        .collect()
}

fn norm(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric() || *c == '+').flat_map(char::to_lowercase).collect()
}

fn metric_column(header: &str) -> Option<usize> {
    let h = norm(header);
    let aliases: &[(&str, usize)] = &[("pearsonr", 1), ("r", 1), ("auroc", 3), ("rocauc", 3)];
    FairnessMetrics::COLUMNS
        .iter()
        .position(|c| norm(c) == h)
        .or_else(|| aliases.iter().find(|(a, _)| *a == h).map(|(_, i)| *i))
}

/// Reads precomputed metrics: a `condition` column, an optional `model`
/// column and any of the metric columns (header matching ignores case and
/// punctuation). Blank, `NA` and `--` cells are missing values.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<FairnessRow>> {
    let file = File::open(path).map_err(|e| HarnessError::unreadable(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| headers.iter().position(|h| norm(h) == name);
    let condition_col = find("condition")
        .ok_or_else(|| HarnessError::SchemaMismatch("metrics file needs a `condition` column".into()))?;
    let model_col = find("model");
    let metric_cols: Vec<(usize, usize)> =
        headers.iter().enumerate().filter_map(|(i, h)| metric_column(h).map(|m| (i, m))).collect();
    if metric_cols.is_empty() {
        return Err(HarnessError::SchemaMismatch("metrics file has no metric columns".into()));
    }

    let mut rows = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut values = [None; 11];
        for &(i, m) in &metric_cols {
            let raw = rec.get(i).unwrap_or("").trim();
            if matches!(raw, "" | "NA" | "-" | "--") {
                continue;
            }
            values[m] = Some(
                raw.parse::<f64>()
                    .map_err(|_| HarnessError::SchemaMismatch(format!("row {}: `{raw}` is not a number", line + 1)))?,
            );
        }
        rows.push(FairnessRow {
            condition: rec.get(condition_col).unwrap_or("").trim().to_string(),
            model: model_col.and_then(|i| rec.get(i)).unwrap_or("-").trim().to_string(),
            n: None,
            values,
        });
    }
    Ok(rows)
}

/// Metrics table in the downstream-evaluation layout, and a lift table where
/// each row is compared with the baseline row of the same model.
pub fn fairness_tables(rows: &[FairnessRow], baseline: &str) -> [Table; 2] {
    let mut header = vec!["Condition".to_string(), "Model".to_string()];
    header.extend(FairnessMetrics::COLUMNS.iter().map(|c| c.to_string()));
    let mut metrics = Table::new("fairness", "Downstream metrics and disparate impact", header);
    for r in rows {
        let mut row = vec![Cell::text(r.condition.clone()), Cell::text(r.model.clone())];
        row.extend(r.values.iter().map(|v| Cell::num(*v)));
        metrics.rows.push(row);
    }

    let mut header = vec!["Condition".to_string(), "Model".to_string()];
    for m in LiftMetric::ALL {
        header.push(m.name().to_string());
        header.push(format!("{} lift (%)", m.name()));
    }
    let mut lifts = Table::new("lift", &format!("Lift over {baseline}"), header);
    lifts.caption = Some("For MSE a decrease counts as positive lift.".into());
    let base_key = norm(baseline);
    for r in rows {
        let base = rows.iter().find(|b| norm(&b.condition) == base_key && b.model == r.model);
        let is_base = norm(&r.condition) == base_key;
        let mut row = vec![Cell::text(r.condition.clone()), Cell::text(r.model.clone())];
        for (i, m) in LiftMetric::ALL.into_iter().enumerate() {
            let lift = match (is_base, r.values[i], base.and_then(|b| b.values[i])) {
                (false, Some(v), Some(b)) => lift_percent(m, v, b),
                _ => None,
            };
            row.push(Cell::num(r.values[i]));
            row.push(Cell::Percent(lift));
        }
        lifts.rows.push(row);
    }
    [metrics, lifts]
}

pub(crate) fn stored_rows(records: &[EvalRecord]) -> Option<(&str, &[FairnessRow])> {
    records.iter().find_map(|r| match r {
        EvalRecord::FairnessSet { baseline, rows } => Some((baseline.as_str(), rows.as_slice())),
        _ => None,
    })
}

/// Stores the rows with the run (when given) and writes both tables; returns
/// the written paths.
pub fn eval_fairness(
    ws: &Workspace,
    run_id: Option<&str>,
    rows: Vec<FairnessRow>,
    baseline: &str,
    precision: usize,
) -> Result<Vec<PathBuf>> {
    if let Some(id) = run_id {
        append_evaluations(ws, id, &[EvalRecord::FairnessSet { baseline: baseline.to_string(), rows: rows.clone() }])?;
    }
    let dir = ws.reports_dir(run_id);
    let mut paths = Vec::new();
    for t in fairness_tables(&rows, baseline) {
        paths.extend(t.write(&dir, precision)?);
    }
    Ok(paths)
}
