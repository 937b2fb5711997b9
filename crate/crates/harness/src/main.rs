use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twinsim::eval::{self, DEFAULT_BASELINE};
use twinsim::report::DEFAULT_PRECISION;
use twinsim::runner::{execute_run, RunRequest};
use twinsim::store::{self, CellStatus, CorpusFormat, Workspace};
use twinsim::{setup, HarnessConfig, HarnessError, Result};
use twinsim_core::Condition;
use twinsim_gateway::{audit_generation_cache, BackendMode, EmbeddingCache, GenerationCache};

#[derive(Parser)]
#[command(name = "twinsim", version, about = "Persona-conditioned digital twin experiments")]
struct Cli {
    /// Harness config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `live` calls providers and records; `replay` serves only recorded responses.
    #[arg(long, global = true, default_value = "live")]
    backend: BackendMode,
    /// Concurrent requests per batch.
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
    parallelism: u16,
    /// Workspace directory holding corpus, caches and runs.
    #[arg(long, global = true, default_value = "twinsim-out")]
    out: PathBuf,
    /// On failure, print a JSON error object to stderr.
    #[arg(long, global = true)]
    error_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a CSV/JSONL corpus into the workspace.
    Ingest {
        path: PathBuf,
        /// Defaults to the file extension.
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Generate every (persona, condition, question) cell; resumable.
    Run {
        /// Comma-separated condition names; all eight when omitted.
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<Condition>,
        /// Model profile from the config.
        #[arg(long)]
        profile: Option<String>,
    },
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Re-render every report of a run from stored evaluations.
    Report {
        #[arg(long)]
        run: String,
        #[command(flatten)]
        fmt: FormatArgs,
    },
    #[command(subcommand)]
    Export(ExportCommand),
    #[command(subcommand)]
    Cache(CacheCommand),
}

#[derive(Args)]
struct FormatArgs {
    /// Decimals in markdown reports (CSV always uses 6).
    #[arg(long, default_value_t = DEFAULT_PRECISION)]
    precision: usize,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Embedding cosine similarity to the gold answers.
    Sim {
        #[arg(long)]
        run: String,
        /// Embedding models; the configured list when omitted.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[command(flatten)]
        fmt: FormatArgs,
    },
    /// ROUGE-1 / ROUGE-L against the gold answers.
    Rouge {
        #[arg(long)]
        run: String,
        #[command(flatten)]
        fmt: FormatArgs,
    },
    /// Big Five estimation from generated transcripts.
    Traits {
        #[arg(long)]
        run: String,
        /// Rating model profile; the run's own profile when omitted.
        #[arg(long)]
        profile: Option<String>,
        #[command(flatten)]
        fmt: FormatArgs,
    },
    /// Downstream metrics, disparate impact and lifts.
    Fairness {
        /// Store and render with this run; otherwise reports go to <out>/reports.
        #[arg(long)]
        run: Option<String>,
        /// JSONL predictions joined with the corpus.
        #[arg(long, conflicts_with = "metrics", required_unless_present = "metrics")]
        predictions: Option<PathBuf>,
        /// CSV of precomputed metrics per condition and model.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Condition label used as the lift baseline.
        #[arg(long, default_value = DEFAULT_BASELINE)]
        baseline: String,
        #[command(flatten)]
        fmt: FormatArgs,
    },
}

#[derive(Subcommand)]
enum ExportCommand {
    /// Write the accepted corpus back out in the raw schema.
    Corpus {
        dest: PathBuf,
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
    /// Generated and gold answers of a run.
    Responses {
        #[arg(long)]
        run: String,
        dest: PathBuf,
        #[arg(long)]
        format: Option<CorpusFormat>,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Summarize caches and runs.
    Ls,
    /// Check cache integrity and that every stored generation can be replayed.
    Verify,
}

fn format_for(path: &Path, explicit: Option<CorpusFormat>) -> Result<CorpusFormat> {
    explicit
        .or_else(|| CorpusFormat::from_path(path))
        .ok_or_else(|| HarnessError::Usage(format!("cannot infer format of {}; pass --format", path.display())))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.error_json {
                let doc = serde_json::json!({"error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()});
                eprintln!("{doc}");
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    let ws = Workspace::new(&cli.out);
    let parallelism = usize::from(cli.parallelism);

    match &cli.command {
        Command::Ingest { path, format } => {
            let summary = store::ingest(&ws, path, format_for(path, *format)?)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Run { conditions, profile } => {
            let profile_name = profile.clone().unwrap_or_else(|| cfg.default_profile.clone());
            let model = cfg.profile(Some(&profile_name))?;
            let corpus = store::load_corpus(&ws)?;
            let mapping = cfg.mapping()?;
            let gateway = setup::chat_gateway(&cfg, model, &ws, cli.backend)?;
            let request = RunRequest {
                corpus: &corpus,
                conditions: if conditions.is_empty() { Condition::ALL.to_vec() } else { conditions.clone() },
                profile_name,
                profile: model,
                mapping: &mapping,
                parallelism,
            };
            let s = execute_run(&ws, &request, &gateway)?;
            eprintln!(
                "{} cells: {} done ({} already done), {} failed; cache hits {}, network requests {}",
                s.total,
                s.done,
                s.previously_done,
                s.failed,
                gateway.stats().cache_hits(),
                gateway.stats().network_requests()
            );
            println!("{}", s.run_id);
            if s.failed > 0 {
                return Err(HarnessError::IncompleteRun { failed: s.failed, total: s.total });
            }
        }
        Command::Eval(e) => eval_command(cli, &cfg, &ws, e, parallelism)?,
        Command::Report { run, fmt } => {
            for p in eval::render_reports(&ws, run, fmt.precision)? {
                println!("{}", p.display());
            }
        }
        Command::Export(ExportCommand::Corpus { dest, format }) => {
            let corpus = store::load_corpus(&ws)?;
            store::export_corpus(&corpus.records, dest, format_for(dest, *format)?)?;
            eprintln!("{} records", corpus.records.len());
        }
        Command::Export(ExportCommand::Responses { run, dest, format }) => {
            let corpus = store::load_corpus(&ws)?;
            let n = store::export_responses(&ws, run, &corpus, format_for(dest, *format)?, dest)?;
            eprintln!("{n} responses");
        }
        Command::Cache(CacheCommand::Ls) => cache_ls(&ws)?,
        Command::Cache(CacheCommand::Verify) => cache_verify(&ws)?,
    }
    Ok(())
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn eval_command(cli: &Cli, cfg: &HarnessConfig, ws: &Workspace, cmd: &EvalCommand, parallelism: usize) -> Result<()> {
    match cmd {
        EvalCommand::Sim { run, models, fmt } => {
            let corpus = store::load_corpus(ws)?;
            let models = if models.is_empty() { cfg.embeddings.models.clone() } else { models.clone() };
            let gateway = setup::embedding_gateway(cfg, ws, cli.backend)?;
            let o = eval::eval_similarity(ws, run, &corpus, &models, &gateway, parallelism)?;
            eprintln!("{} similarity samples, {} skipped", o.samples, o.skipped);
            print_paths(&eval::render_reports(ws, run, fmt.precision)?);
            if o.skipped > 0 {
                return Err(HarnessError::Skipped { what: "similarity samples skipped", count: o.skipped });
            }
        }
        EvalCommand::Rouge { run, fmt } => {
            let corpus = store::load_corpus(ws)?;
            let n = eval::eval_rouge(ws, run, &corpus)?;
            eprintln!("{n} ROUGE samples");
            print_paths(&eval::render_reports(ws, run, fmt.precision)?);
        }
        EvalCommand::Traits { run, profile, fmt } => {
            let manifest = store::load_manifest(ws, run)?;
            let name = profile.clone().unwrap_or(manifest.profile);
            let model = cfg.profile(Some(&name))?;
            let corpus = store::load_corpus(ws)?;
            let mapping = cfg.mapping()?;
            let gateway = setup::chat_gateway(cfg, model, ws, cli.backend)?;
            let o = eval::eval_traits(ws, run, &corpus, &model.generation, &mapping, &gateway, parallelism)?;
            eprintln!(
                "{} rated, {} unparsable (skipped), {} failed, {} without a full transcript",
                o.rated, o.unparsable, o.failed, o.incomplete
            );
            print_paths(&eval::render_reports(ws, run, fmt.precision)?);
            if o.failed > 0 {
                return Err(HarnessError::Skipped { what: "trait ratings failed", count: o.failed });
            }
        }
        EvalCommand::Fairness { run, predictions, metrics, baseline, fmt } => {
            if let Some(id) = run {
                ws.existing_run_dir(id)?;
            }
            let rows = match (predictions, metrics) {
                (Some(p), _) => {
                    let corpus = store::load_corpus(ws)?;
                    eval::fairness_rows(&eval::read_predictions(p)?, &corpus, &cfg.policy)?
                }
                (None, Some(m)) => eval::read_metrics_csv(m)?,
                (None, None) => unreachable!("clap requires one input"),
            };
            print_paths(&eval::eval_fairness(ws, run.as_deref(), rows, baseline, fmt.precision)?);
        }
    }
    Ok(())
}

fn cache_ls(ws: &Workspace) -> Result<()> {
    let gen_path = ws.generation_cache_path();
    let gens = GenerationCache::open(&gen_path)?;
    println!("{}: {} generations ({} unreadable lines)", gen_path.display(), gens.len(), gens.skipped_lines());
    let emb_path = ws.embedding_cache_path();
    let embs = EmbeddingCache::open(&emb_path)?;
    println!("{}: {} embeddings", emb_path.display(), embs.len());
    for (model, n) in embs.model_counts() {
        println!("  {model}: {n}");
    }
    for id in ws.list_runs()? {
        let m = store::load_manifest(ws, &id)?;
        println!(
            "run {id}: model {}, {} cells, {} done, {} failed, {} pending",
            m.model_id,
            m.cells.len(),
            m.count(CellStatus::Done),
            m.count(CellStatus::Failed),
            m.count(CellStatus::Pending)
        );
    }
    Ok(())
}

fn cache_verify(ws: &Workspace) -> Result<()> {
    let audit = audit_generation_cache(&ws.generation_cache_path())?;
    println!("{}", serde_json::to_string_pretty(&audit)?);
    let mut problems = usize::from(!audit.is_clean());

    let cache = GenerationCache::open(ws.generation_cache_path())?;
    for id in ws.list_runs()? {
        let done =
            store::load_generations(ws, &id, &store::GenerationFilter { only_done: true, ..Default::default() })?;
        let missing =
            done.iter().filter(|r| r.record.as_ref().is_some_and(|g| cache.get(&g.cache_key).is_none())).count();
        println!("run {id}: {} generations, {missing} not replayable from cache", done.len());
        problems += usize::from(missing > 0);
    }
    if problems > 0 {
        return Err(HarnessError::Skipped { what: "integrity problems", count: problems });
    }
    Ok(())
}
