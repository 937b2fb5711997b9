#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use twinsim::store::{
    save_generation, write_manifest, CellId, CellRecord, CellStatus, Corpus, ManifestCell, RunManifest, Workspace,
};
use twinsim_core::persona::fields;
use twinsim_core::{Condition, PersonaRecord, RawRecord};
use twinsim_gateway::transport::{HttpRequest, HttpResponse, Transport, TransportError};
use twinsim_gateway::{
    cache_key, Backend, BackendMode, EmbeddingProvider, GatewayError, GenerationConfig, GenerationRecord,
    GenerationRequest, Sleeper,
};

const WORDS: &[&str] = &[
    "doctor",
    "needle",
    "wait",
    "trust",
    "numbers",
    "label",
    "dose",
    "clinic",
    "nurse",
    "worry",
    "bill",
    "insurance",
    "chart",
    "percent",
    "risk",
    "pill",
    "blood",
    "test",
    "result",
    "visit",
    "honest",
    "rushed",
    "careful",
    "forms",
];

fn sentence(rng: &mut StdRng, nonce: &str) -> String {
    let n = rng.gen_range(4..14);
    let mut words: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    words[0][..1].make_ascii_uppercase();
    words.insert(rng.gen_range(0..=words.len()), nonce.to_string());
    words.join(" ") + "."
}

/// A valid raw row with random attributes and gold answers that each carry
/// a unique marker token.
pub fn synthetic_raw(rng: &mut StdRng, id: &str) -> RawRecord {
    let pick = |rng: &mut StdRng, xs: &[&str]| xs.choose(rng).unwrap().to_string();
    let likert = |rng: &mut StdRng| rng.gen_range(1..=5).to_string();
    let mut raw = RawRecord::new();
    let mut put = |k: &str, v: String| {
        raw.insert(k.to_string(), v);
    };
    put(fields::ID, id.to_string());
    put(fields::AGE, rng.gen_range(18..=99).to_string());
    put(fields::SEX, pick(rng, &["Male", "Female"]));
    put(
        fields::RACE,
        pick(
            rng,
            &[
                "White",
                "Black or African American",
                "Asian",
                "Multiracial or Biracial",
                "Other",
                "Prefer not to answer",
                "",
            ],
        ),
    );
    put(fields::EDUCATION, pick(rng, &["Less than college", "Some college", "College graduate", "Graduate degree"]));
    put(
        fields::INCOME,
        pick(
            rng,
            &[
                "Less than $20,000",
                "$20,000-$34,999",
                "$35,000-$49,999",
                "$50,000-$74,999",
                "$75,000-$89,999",
                "$90,000 or more",
                "Unsure",
                "",
            ],
        ),
    );
    put(fields::PRESCRIPTION_COUNT, rng.gen_range(0..6).to_string());
    put(fields::HAS_PRIMARY_PHYSICIAN, pick(rng, &["yes", "no"]));
    put(fields::PHYSICIAN_VISITS_2YR, rng.gen_range(0..12).to_string());
    put(fields::ACTIVITY_HOURS_PER_WEEK, format!("{:.1}", rng.gen_range(0.0..15.0)));
    put(fields::EATING_HABITS, likert(rng));
    put(fields::SMOKING_FREQUENCY, pick(rng, &["Never", "Rarely", "Occasionally", "Frequently", "Daily"]));
    put(fields::DRINKING_FREQUENCY, pick(rng, &["Never", "Rarely", "Occasionally", "Frequently", "Daily"]));
    put(fields::HEALTH_CONSCIOUSNESS, likert(rng));
    put(fields::OVERALL_HEALTH, likert(rng));
    for c in [
        fields::BIG5_EXTRAVERTED,
        fields::BIG5_AGREEABLE,
        fields::BIG5_CONSCIENTIOUS,
        fields::BIG5_STABLE,
        fields::BIG5_OPEN,
    ] {
        put(c, likert(rng));
    }
    for (i, c) in [fields::TEXT_NUMERACY, fields::TEXT_ANXIETY, fields::TEXT_TRUSTPHYS, fields::TEXT_SUBJECTIVELIT]
        .into_iter()
        .enumerate()
    {
        let nonce = format!("zq{id}x{i}k{}", rng.gen_range(0..1_000_000));
        put(c, sentence(rng, &nonce));
    }
    put("score_trustphys", format!("{:.2}", rng.gen_range(1.0..5.0)));
    raw
}

pub fn write_csv(path: &Path, rows: &[RawRecord]) {
    let mut columns: Vec<String> = fields::FIXED.iter().map(|s| s.to_string()).collect();
    columns.push("score_trustphys".into());
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(&columns).unwrap();
    for r in rows {
        w.write_record(columns.iter().map(|c| r.get(c).map(String::as_str).unwrap_or(""))).unwrap();
    }
    w.flush().unwrap();
}

pub fn corpus_of(records: Vec<PersonaRecord>) -> Corpus {
    let mut body = Vec::new();
    for r in &records {
        body.extend(serde_json::to_vec(r).unwrap());
        body.push(b'\n');
    }
    Corpus { records, hash: hex::encode(Sha256::digest(&body)) }
}

/// Deterministic reply text for a chat request body, used by the fakes.
pub fn canned_reply(body: &Value) -> String {
    let messages = body["messages"].as_array().cloned().unwrap_or_default();
    let last = messages.last().and_then(|m| m["content"].as_str()).unwrap_or("");
    if last.contains("Extraverted: <1-5>") {
        return "Extraverted: 3\nAgreeable: 4\nConscientious: 3\nStable: 2\nOpen: 5".into();
    }
    let system = messages.first().and_then(|m| m["content"].as_str()).unwrap_or("");
    let digest = hex::encode(Sha256::digest(body.to_string().as_bytes()));
    let pick: Vec<&str> = last.split_whitespace().take(6).collect();
    let context: Vec<&str> = system.split_whitespace().skip(3).take(5).collect();
    format!("{} {} ({})", pick.join(" "), context.join(" "), &digest[..8])
}

/// Hashed bag-of-words vector; deterministic and non-zero.
pub fn text_vector(text: &str, dims: usize) -> Vec<f64> {
    let mut v = vec![0.0; dims];
    v[0] = 1.0;
    for w in text.split_whitespace() {
        let h = Sha256::digest(w.to_lowercase().as_bytes());
        v[h[0] as usize % dims] += 1.0 + f64::from(h[1]) / 255.0;
    }
    v
}

/// Transport answering through a closure, counting calls.
pub struct FnTransport<F> {
    pub f: F,
    pub calls: AtomicUsize,
}

impl<F> FnTransport<F>
where
    F: Fn(usize, &HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync,
{
    pub fn new(f: F) -> Arc<Self> {
        Arc::new(FnTransport { f, calls: AtomicUsize::new(0) })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(usize, &HttpRequest) -> Result<HttpResponse, TransportError> + Send + Sync,
{
    fn post_json(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(n, request)
    }
}

pub fn chat_ok(text: &str) -> HttpResponse {
    HttpResponse {
        status: 200,
        body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string(),
        retry_after: None,
    }
}

pub fn status(code: u16) -> HttpResponse {
    HttpResponse { status: code, body: format!("{{\"error\": \"status {code}\"}}"), retry_after: None }
}

pub fn echo_transport() -> Arc<impl Transport> {
    FnTransport::new(|_, r: &HttpRequest| Ok(chat_ok(&canned_reply(&r.body))))
}

#[derive(Default)]
pub struct RecordingSleeper {
    pub delays: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays.lock().unwrap().push(d);
    }
}

/// Embeds texts of the form `vec a b c ...` as the listed numbers.
pub struct VecTextProvider;

impl EmbeddingProvider for VecTextProvider {
    fn embed_text(&self, _model_id: &str, text: &str) -> Result<Vec<f64>, GatewayError> {
        text.strip_prefix("vec ")
            .and_then(|rest| rest.split_whitespace().map(|x| x.parse().ok()).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| GatewayError::ProviderError { status: 404, body: format!("no vector for `{text}`") })
    }
}

/// Writes a finished run directly into the store: every target cell of every
/// condition gets `text(record, cell)` as its generation.
pub fn fixture_run(
    ws: &Workspace,
    run_id: &str,
    corpus: &Corpus,
    conditions: &[Condition],
    text: impl Fn(&PersonaRecord, &CellId) -> String,
) {
    let config = GenerationConfig::openai_defaults("fixture-model");
    let mut cells = Vec::new();
    let mut records = Vec::new();
    for p in &corpus.records {
        for &condition in conditions {
            for question in condition.targets() {
                let cell = CellId { persona_id: p.id.clone(), condition, question };
                let messages = vec![twinsim_core::ChatMessage::user(question.prompt())];
                let mut cfg = config.clone();
                cfg.seed_note = Some(twinsim::runner::cell_seed_note(&cell));
                let record = GenerationRecord {
                    cache_key: cache_key(&messages, &cfg),
                    request: GenerationRequest { messages, config: cfg },
                    response_text: text(p, &cell),
                    latency_ms: 0,
                    backend: Backend::Replay,
                    timestamp: "2024-01-01T00:00:00Z".parse().unwrap(),
                    retry_count: 0,
                };
                cells.push(ManifestCell { cell: cell.clone(), status: CellStatus::Done });
                records.push(CellRecord { cell, model_id: config.model_id.clone(), record: Some(record), error: None });
            }
        }
    }
    write_manifest(
        ws,
        &RunManifest {
            run_id: run_id.into(),
            corpus_hash: corpus.hash.clone(),
            conditions: conditions.to_vec(),
            profile: "fixture".into(),
            model_id: config.model_id.clone(),
            config,
            mapping_version: "1.0.0".into(),
            backend: BackendMode::Replay,
            created_at: "2024-01-01T00:00:00Z".into(),
            cells,
        },
    )
    .unwrap();
    for r in &records {
        save_generation(ws, run_id, r).unwrap();
    }
}

/// Minimal OpenAI-compatible HTTP server: chat completions answer with
/// [`canned_reply`], embeddings with [`text_vector`]. One connection per request.
pub struct FakeProvider {
    pub base_url: String,
    pub requests: Arc<AtomicUsize>,
}

impl FakeProvider {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let counter = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let counter = counter.clone();
                std::thread::spawn(move || {
                    let _ = serve_one(stream, &counter);
                });
            }
        });
        FakeProvider { base_url, requests }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn serve_one(mut stream: std::net::TcpStream, counter: &AtomicUsize) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            content_length = v.trim().parse().unwrap_or(0);
        }
    }
    let mut buf = vec![0u8; content_length];
    reader.read_exact(&mut buf)?;
    counter.fetch_add(1, Ordering::SeqCst);
    let body: Value = serde_json::from_slice(&buf).unwrap_or(Value::Null);
    let reply = if path.ends_with("/embeddings") {
        let data: Vec<Value> = body["input"]
            .as_array()
            .cloned()
            .unwrap_or_default()
            .iter()
            .enumerate()
            .map(|(i, t)| json!({"index": i, "embedding": text_vector(t.as_str().unwrap_or(""), 16)}))
            .collect();
        json!({"data": data}).to_string()
    } else {
        json!({"choices": [{"message": {"role": "assistant", "content": canned_reply(&body)}}]}).to_string()
    };
    write!(
        stream,
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    stream.flush()
}

/// Config document pointing both services at `base_url`.
pub fn fake_config(base_url: &str) -> String {
    format!(
        r#"
default_profile = "fake"
max_in_flight = 4

[retry]
max_retries = 2
initial_delay_ms = 1
max_delay_ms = 5

[profiles.fake]
model_id = "fake-model"
temperature = 0.6
top_p = 1.0
max_tokens = 200
min_tokens = 0
endpoint = {{ base_url = "{base_url}", path = "/v1/chat/completions" }}

[embeddings]
models = ["fake-bert", "fake-minilm", "fake-mpnet"]
endpoint = {{ base_url = "{base_url}", path = "/v1/embeddings" }}
"#
    )
}

pub fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path()).unwrap());
    }
    out
}
