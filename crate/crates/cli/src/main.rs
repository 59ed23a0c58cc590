use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use futures::stream::{self, StreamExt};
use tracing::warn;
use tracing_subscriber::EnvFilter;

use screening_core::assess::assess_resume;
use screening_core::classify::{classify_resume, classify_resume_offline, redact};
use screening_core::dataset::fetch_dataset;
use screening_core::decide::record_manual_decision;
use screening_core::ingest::{filter_corpus, load_corpus, prepare_record};
use screening_core::llm::{build_backend, BackendKind};
use screening_core::metrics::{evaluate_assessments, render_report};
use screening_core::runtime::{auto_decide_run, run_pipeline, store, RunStore};
use screening_core::{
    jsonl, AgentAssessment, DecisionCriteria, Error, RedactedResume, Result, ResumeRecord,
    RunConfig,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Http,
}

#[derive(Debug, Parser)]
#[command(name = "screen", version, about = "Resume screening pipeline")]
struct Cli {
    /// Run config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the backend kind for every stage.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendChoice>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize, segment and token-filter a corpus.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory for records.jsonl and excluded.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Label sentences and drop personal information.
    Classify {
        /// records.jsonl from `ingest`.
        #[arg(long)]
        input: PathBuf,
        /// Directory for classified.jsonl and redacted.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Use the rule-based labeller instead of a backend.
        #[arg(long)]
        offline: bool,
    },
    /// Grade and summarize redacted resumes.
    Assess {
        /// redacted.jsonl from `classify`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record a decision for a stored run. Without `--select` the decision
    /// agent chooses.
    Decide {
        #[arg(long)]
        run: String,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        hires: usize,
        #[arg(long, default_value = "")]
        role: String,
        #[arg(long, num_args = 1..)]
        select: Vec<String>,
        #[arg(long, default_value = "")]
        rationale: String,
        #[arg(long, default_value = "reviewer")]
        decider: String,
        #[arg(long)]
        force: bool,
    },
    /// Score predicted assessments against gold ones.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the whole pipeline into the run store.
    Run {
        /// Run store root; overrides `store_root`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a stored run against its manifest.
    Verify {
        #[arg(long)]
        run: String,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Serve the REST API. The bearer token comes from SCREEN_API_TOKEN.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Download a dataset into a content-addressed cache.
    Fetch {
        #[arg(long)]
        url: String,
        #[arg(long, default_value = "data")]
        cache: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(choice) = cli.backend {
        let kind = match choice {
            BackendChoice::Mock => BackendKind::Mock,
            BackendChoice::Http => BackendKind::HttpChat,
        };
        cfg.backend.kind = kind;
        for stage in [
            &mut cfg.stages.classify,
            &mut cfg.stages.assess,
            &mut cfg.stages.decide,
        ] {
            if let Some(b) = stage.as_mut() {
                b.kind = kind;
            }
        }
    }
    Ok(cfg)
}

fn store_for(cfg: &RunConfig, store: Option<PathBuf>) -> RunStore {
    RunStore::new(store.unwrap_or_else(|| cfg.store_root.clone()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

async fn execute(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    // eval, verify, serve and fetch never touch the corpus
    if matches!(
        cli.command,
        Command::Ingest { .. }
            | Command::Classify { .. }
            | Command::Assess { .. }
            | Command::Decide { .. }
    ) {
        cfg.validate()?;
    }
    match cli.command {
        Command::Ingest { corpus, out } => {
            let corpus = corpus.unwrap_or_else(|| cfg.corpus.clone());
            let docs = load_corpus(&corpus)?;
            let estimator = cfg.token_estimator()?;
            let records: Vec<ResumeRecord> =
                docs.iter().map(|d| prepare_record(d, &estimator)).collect();
            let (kept, excluded) = filter_corpus(records, cfg.token_limit);
            ensure_dir(&out)?;
            jsonl::write(&out.join(store::RECORDS), &kept)?;
            jsonl::write(&out.join(store::EXCLUDED), &excluded)?;
            println!(
                "ingested {} documents: {} kept, {} over the token limit",
                docs.len(),
                kept.len(),
                excluded.len()
            );
        }
        Command::Classify {
            input,
            out,
            offline,
        } => {
            let records: Vec<ResumeRecord> = jsonl::read(&input)?;
            let templates = cfg.templates()?;
            let classified = if offline {
                records
                    .iter()
                    .map(classify_resume_offline)
                    .collect::<Vec<_>>()
            } else {
                let backend = build_backend(cfg.stage_backend("classify"))?;
                let mut all = Vec::with_capacity(records.len());
                for record in &records {
                    all.push(
                        classify_resume(
                            record,
                            backend.as_ref(),
                            &templates.classify,
                            &cfg.classify.generation,
                            cfg.classify.retry,
                        )
                        .await?,
                    );
                }
                all
            };
            let mut redacted = Vec::new();
            for sentences in classified.iter().filter(|s| !s.is_empty()) {
                let r = redact(sentences)?;
                if r.is_fully_redacted() {
                    warn!(resume_id = %r.resume_id, "fully redacted");
                }
                redacted.push(r);
            }
            ensure_dir(&out)?;
            let flat: Vec<_> = classified.into_iter().flatten().collect();
            jsonl::write(&out.join(store::CLASSIFIED), &flat)?;
            jsonl::write(&out.join(store::REDACTED), &redacted)?;
            let removed: usize = redacted.iter().map(|r| r.redacted_count).sum();
            println!(
                "classified {} sentences, removed {removed} as personal information",
                flat.len()
            );
        }
        Command::Assess { input, out } => {
            let resumes: Vec<RedactedResume> = jsonl::read(&input)?;
            let templates = cfg.templates()?;
            let backend = build_backend(cfg.stage_backend("assess"))?;
            let limit = backend.max_in_flight().max(1);
            let todo: Vec<&RedactedResume> =
                resumes.iter().filter(|r| !r.is_fully_redacted()).collect();
            let results: Vec<Result<AgentAssessment>> = stream::iter(0..todo.len())
                .map(|i| assess_resume(todo[i], backend.as_ref(), &templates.assess, &cfg.assess))
                .buffered(limit)
                .collect()
                .await;
            let mut done = Vec::new();
            let mut failures = 0;
            for (resume, result) in todo.iter().zip(results) {
                match result {
                    Ok(a) => done.push(a),
                    Err(e) => {
                        failures += 1;
                        eprintln!("warning: {}: {e}", resume.resume_id);
                    }
                }
            }
            jsonl::write(&out, &done)?;
            println!("assessed {} resumes, {failures} failed", done.len());
            if !todo.is_empty() && done.is_empty() {
                return Ok(ExitCode::from(3));
            }
        }
        Command::Decide {
            run,
            store,
            hires,
            role,
            select,
            rationale,
            decider,
            force,
        } => {
            let store = store_for(&cfg, store);
            let criteria = DecisionCriteria::hires(hires).with_role(role);
            let record = if select.is_empty() {
                auto_decide_run(&store, &run, &criteria, None, force).await?
            } else {
                let report = store.load_run(&run)?;
                let record = record_manual_decision(
                    &run,
                    &report.shortlist,
                    &criteria,
                    select,
                    rationale,
                    decider,
                )?;
                store.append_decision(&run, record.clone(), &[], force)?;
                record
            };
            println!(
                "{}",
                serde_json::to_string_pretty(&record).map_err(Error::from)?
            );
        }
        Command::Eval { pred, gold, out } => {
            let pred: Vec<AgentAssessment> = jsonl::read(&pred)?;
            let gold: Vec<AgentAssessment> = jsonl::read(&gold)?;
            let report = evaluate_assessments(&pred, &gold, &cfg.eval)?;
            print!("{}", render_report(&report));
            if let Some(out) = out {
                let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
                std::fs::write(&out, text + "\n").map_err(|e| Error::io(&out, e))?;
            }
        }
        Command::Run { out } => {
            let mut cfg = cfg;
            if let Some(root) = out {
                cfg.store_root = root;
            }
            let report = run_pipeline(cfg).await?;
            println!(
                "run {} finished with status {}",
                report.run_id, report.status
            );
            println!(
                "ingested {}, kept {}, assessed {}, shortlisted {}",
                report.counts.ingested,
                report.counts.kept,
                report.counts.assessed,
                report.counts.shortlisted
            );
            for d in &report.decisions {
                println!("decision ({:?}): {}", d.mode, d.selected_ids.join(", "));
            }
            if let Some(s) = &report.timing.speedups {
                println!(
                    "speedup: {}x automatic ({:.2}), {}x with human decision ({:.2})",
                    s.auto.reported, s.auto.raw, s.semi_auto.reported, s.semi_auto.raw
                );
            }
            if !report.is_ok() {
                if let Some(f) = &report.failure {
                    eprintln!("error: {f}");
                }
                return Ok(ExitCode::from(3));
            }
        }
        Command::Verify { run, store } => {
            let store = store_for(&cfg, store);
            let manifest = store.verify(&run)?;
            println!("run {run}: {} files verified", manifest.files.len());
        }
        Command::Serve { port, host, store } => {
            let addr = SocketAddr::new(host, port);
            let store = store_for(&cfg, store);
            let state = screening_api::AppState::from_env(store, cfg)?;
            let listener = tokio::net::TcpListener::bind(addr)
                .await
                .map_err(|e| Error::io(addr.to_string(), e))?;
            screening_api::serve(listener, state)
                .await
                .map_err(|e| Error::io(addr.to_string(), e))?;
        }
        Command::Fetch { url, cache } => {
            let path = fetch_dataset(&url, &cache).await?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match execute(cli).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
