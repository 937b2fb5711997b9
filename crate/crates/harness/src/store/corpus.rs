use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use twinsim_core::persona::fields;
use twinsim_core::{normalize_record, PersonaRecord, RawRecord};

use super::{sha256_hex, write_atomic, Workspace};
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guesses from the extension: `.csv` or `.jsonl`/`.json`.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(CorpusFormat::Csv),
            "jsonl" | "json" | "ndjson" => Some(CorpusFormat::Jsonl),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            CorpusFormat::Csv => "csv",
            CorpusFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(CorpusFormat::Csv),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            _ => Err(format!("unknown format `{s}` (expected csv or jsonl)")),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// One rejected input row. `row` is 1-based and excludes the CSV header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub row: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub class: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub source: String,
    pub format: CorpusFormat,
    pub rows: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub rejects_by_class: BTreeMap<String, usize>,
    pub corpus_hash: String,
}

/// Parsed rows in file order; a row that could not even be read as a flat
/// record comes back as a reject.
pub fn read_raw_rows(path: &Path, format: CorpusFormat) -> Result<Vec<Result<RawRecord, RejectRecord>>> {
    let file = File::open(path).map_err(|e| HarnessError::unreadable(path, e))?;
    match format {
        CorpusFormat::Csv => read_csv(file),
        CorpusFormat::Jsonl => read_jsonl_rows(file, path),
    }
}

fn read_csv(file: File) -> Result<Vec<Result<RawRecord, RejectRecord>>> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| HarnessError::SchemaMismatch(format!("unreadable header row: {e}")))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
        .collect();
    let present: BTreeSet<&str> = headers.iter().map(String::as_str).collect();
    let missing: Vec<&str> = fields::REQUIRED_COLUMNS.iter().copied().filter(|c| !present.contains(c)).collect();
    if !missing.is_empty() {
        return Err(HarnessError::SchemaMismatch(format!("header lacks required column(s): {}", missing.join(", "))));
    }
    for h in &headers {
        if !fields::FIXED.contains(&h.as_str()) && !h.starts_with(fields::SCORE_PREFIX) {
            log::warn!("ignoring unknown column `{h}`");
        }
    }

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        out.push(match rec {
            Ok(rec) => Ok(headers.iter().cloned().zip(rec.iter().map(str::to_string)).collect()),
            Err(e) => Err(RejectRecord { row, id: None, class: "MalformedRow".into(), reason: e.to_string() }),
        });
    }
    Ok(out)
}

fn read_jsonl_rows(file: File, path: &Path) -> Result<Vec<Result<RawRecord, RejectRecord>>> {
    let mut out = Vec::new();
    let mut row = 0;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| HarnessError::unreadable(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let reject = |reason: String| RejectRecord { row, id: None, class: "MalformedRow".into(), reason };
        let parsed = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(map)) => map
                .into_iter()
                .map(|(k, v)| {
                    let s = match v {
                        Value::Null => String::new(),
                        Value::String(s) => s,
                        Value::Bool(b) => b.to_string(),
                        Value::Number(n) => n.to_string(),
                        other => return Err(reject(format!("field `{k}` is not a scalar: {other}"))),
                    };
                    Ok((k, s))
                })
                .collect::<Result<RawRecord, RejectRecord>>(),
            Ok(_) => Err(reject("line is not a JSON object".into())),
            Err(e) => Err(reject(format!("invalid JSON: {e}"))),
        };
        out.push(parsed);
    }
    Ok(out)
}

/// Validates every row of `path` and writes the accepted corpus, the rejects
/// and a summary into the workspace. Replaces any previous corpus.
pub fn ingest(ws: &Workspace, path: &Path, format: CorpusFormat) -> Result<IngestSummary> {
    let rows = read_raw_rows(path, format)?;
    let mut accepted: Vec<PersonaRecord> = Vec::new();
    let mut rejects: Vec<RejectRecord> = Vec::new();
    let mut seen = BTreeSet::new();

    for (i, row) in rows.iter().enumerate() {
        let raw = match row {
            Ok(raw) => raw,
            Err(r) => {
                rejects.push(r.clone());
                continue;
            }
        };
        let id = raw.get(fields::ID).map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        match normalize_record(raw) {
            Ok(rec) if !seen.insert(rec.id.clone()) => rejects.push(RejectRecord {
                row: i + 1,
                id,
                class: "DuplicateId".into(),
                reason: format!("id `{}` already accepted", rec.id),
            }),
            Ok(rec) => accepted.push(rec),
            Err(e) => rejects.push(RejectRecord { row: i + 1, id, class: e.kind().into(), reason: e.to_string() }),
        }
    }

    let dir = ws.corpus_dir();
    let mut body = Vec::new();
    for rec in &accepted {
        body.extend(serde_json::to_vec(rec)?);
        body.push(b'\n');
    }
    write_atomic(&dir.join("personas.jsonl"), &body)?;
    let mut reject_body = Vec::new();
    for r in &rejects {
        reject_body.extend(serde_json::to_vec(r)?);
        reject_body.push(b'\n');
    }
    write_atomic(&dir.join("rejects.jsonl"), &reject_body)?;

    let mut rejects_by_class = BTreeMap::new();
    for r in &rejects {
        *rejects_by_class.entry(r.class.clone()).or_insert(0) += 1;
    }
    let summary = IngestSummary {
        source: path.display().to_string(),
        format,
        rows: rows.len(),
        accepted: accepted.len(),
        rejected: rejects.len(),
        rejects_by_class,
        corpus_hash: sha256_hex(&body),
    };
    write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

/// The accepted corpus and the hash of its canonical serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<PersonaRecord>,
    pub hash: String,
}

impl Corpus {
    pub fn get(&self, id: &str) -> Option<&PersonaRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn by_id(&self) -> BTreeMap<&str, &PersonaRecord> {
        self.records.iter().map(|r| (r.id.as_str(), r)).collect()
    }
}

pub fn load_corpus(ws: &Workspace) -> Result<Corpus> {
    let path = ws.corpus_dir().join("personas.jsonl");
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(HarnessError::NoCorpus(ws.root().into())),
        Err(e) => return Err(HarnessError::unreadable(&path, e)),
    };
    let mut records = Vec::new();
    for line in bytes.split(|b| *b == b'\n').filter(|l| !l.is_empty()) {
        records.push(serde_json::from_slice(line)?);
    }
    Ok(Corpus { records, hash: sha256_hex(&bytes) })
}

/// Writes records back out in the documented raw schema.
pub fn export_corpus(records: &[PersonaRecord], path: &Path, format: CorpusFormat) -> Result<()> {
    let raws: Vec<RawRecord> = records.iter().map(PersonaRecord::to_raw).collect();
    let mut body = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for raw in &raws {
                body.extend(serde_json::to_vec(raw)?);
                body.push(b'\n');
            }
        }
        CorpusFormat::Csv => {
            let scores: BTreeSet<&String> =
                raws.iter().flat_map(|r| r.keys()).filter(|k| k.starts_with(fields::SCORE_PREFIX)).collect();
            let columns: Vec<&str> =
                fields::FIXED.iter().copied().chain(scores.into_iter().map(String::as_str)).collect();
            let mut w = csv::Writer::from_writer(&mut body);
            w.write_record(&columns)?;
            for raw in &raws {
                w.write_record(columns.iter().map(|c| raw.get(*c).map(String::as_str).unwrap_or("")))?;
            }
            w.flush()?;
        }
    }
    write_atomic(path, &body)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const HEADER: &str = "id,age,sex,race,education,income,prescription_count,has_primary_physician,physician_visits_2yr,activity_hours_per_week,eating_habits,smoking_frequency,drinking_frequency,health_consciousness,overall_health,big5_extraverted,big5_agreeable,big5_conscientious,big5_stable,big5_open,text_numeracy,text_anxiety,text_trustphys,text_subjectivelit,score_trustphys";

    pub(crate) fn row(id: &str, age: u32) -> String {
        format!(
            "{id},{age},Female,White,Some college,\"$50,000-$74,999\",1,yes,3,2.5,4,Never,Rarely,4,3,3,4,5,2,4,Numbers are fine.,Needles scare me.,I trust my doctor.,\"I read labels, mostly.\",3.25"
        )
    }

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn three_valid_rows() {
        let dir = tempfile::tempdir().unwrap();
        let csv =
            write(dir.path(), "c.csv", &format!("{HEADER}\n{}\n{}\n{}\n", row("a", 30), row("b", 40), row("c", 50)));
        let ws = Workspace::new(dir.path().join("out"));
        let s = ingest(&ws, &csv, CorpusFormat::Csv).unwrap();
        assert_eq!((s.rows, s.accepted, s.rejected), (3, 3, 0));
        let corpus = load_corpus(&ws).unwrap();
        assert_eq!(corpus.records.len(), 3);
        assert_eq!(corpus.hash, s.corpus_hash);
        assert_eq!(corpus.get("b").unwrap().gold_scores["trustphys"], 3.25);
    }

    #[test]
    fn underage_row_rejected_with_class() {
        let dir = tempfile::tempdir().unwrap();
        let csv =
            write(dir.path(), "c.csv", &format!("{HEADER}\n{}\n{}\n{}\n", row("a", 30), row("b", 17), row("c", 50)));
        let ws = Workspace::new(dir.path().join("out"));
        let s = ingest(&ws, &csv, CorpusFormat::Csv).unwrap();
        assert_eq!((s.accepted, s.rejected), (2, 1));
        assert_eq!(s.rejects_by_class, BTreeMap::from([("OutOfRange".to_string(), 1)]));
        let rejects = fs::read_to_string(ws.corpus_dir().join("rejects.jsonl")).unwrap();
        let r: RejectRecord = serde_json::from_str(rejects.lines().next().unwrap()).unwrap();
        assert_eq!((r.row, r.id.as_deref(), r.class.as_str()), (2, Some("b"), "OutOfRange"));
    }

    #[test]
    fn missing_id_column_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let header = HEADER.replacen("id,", "ident,", 1);
        let csv = write(dir.path(), "c.csv", &format!("{header}\n{}\n", row("a", 30)));
        let ws = Workspace::new(dir.path().join("out"));
        assert!(matches!(ingest(&ws, &csv, CorpusFormat::Csv), Err(HarnessError::SchemaMismatch(_))));
        assert!(matches!(
            ingest(&ws, &dir.path().join("absent.csv"), CorpusFormat::Csv),
            Err(HarnessError::UnreadableFile { .. })
        ));
    }

    #[test]
    fn duplicates_and_malformed_rows_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "c.csv", &format!("{HEADER}\n{}\n{}\na,b\n", row("a", 30), row("a", 31)));
        let ws = Workspace::new(dir.path().join("out"));
        let s = ingest(&ws, &csv, CorpusFormat::Csv).unwrap();
        assert_eq!(s.rows, 3);
        assert_eq!(s.accepted + s.rejected, s.rows);
        assert_eq!(s.rejects_by_class["DuplicateId"], 1);
        assert_eq!(s.rejects_by_class["MalformedRow"], 1);
    }

    #[test]
    fn jsonl_accepts_numbers_and_nulls() {
        let dir = tempfile::tempdir().unwrap();
        let good = r#"{"id":"j1","age":33,"sex":"Male","race":null,"education":"Graduate degree","income":"Unsure","prescription_count":0,"has_primary_physician":false,"physician_visits_2yr":0,"activity_hours_per_week":0,"eating_habits":3,"smoking_frequency":"Daily","drinking_frequency":"Never","health_consciousness":2,"overall_health":2,"big5_extraverted":1,"big5_agreeable":2,"big5_conscientious":3,"big5_stable":4,"big5_open":5}"#;
        let body = format!("{good}\n\n[1,2]\n{{\"id\": \n");
        let p = write(dir.path(), "c.jsonl", &body);
        let ws = Workspace::new(dir.path().join("out"));
        let s = ingest(&ws, &p, CorpusFormat::Jsonl).unwrap();
        assert_eq!((s.rows, s.accepted, s.rejected), (3, 1, 2));
        let rec = &load_corpus(&ws).unwrap().records[0];
        assert!(rec.missing_fields.contains("race"));
        assert!(rec.gold_responses.is_empty());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(CorpusFormat::from_path(Path::new("x.CSV")), Some(CorpusFormat::Csv));
        assert_eq!(CorpusFormat::from_path(Path::new("x.jsonl")), Some(CorpusFormat::Jsonl));
        assert_eq!(CorpusFormat::from_path(Path::new("x.txt")), None);
    }
}
