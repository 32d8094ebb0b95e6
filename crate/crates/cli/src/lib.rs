//! Campaign driver: runs simulated sessions over a corpus, recomputes
//! reports from logs and hosts the human evaluation service.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use imteval_core::backends::BackendSpec;
use imteval_core::corpus::{read_logs, write_logs, CorpusError, CorpusFormat, ParallelCorpus};
use imteval_core::metrics::{aggregate_with, write_session_csv, CampaignReport, ConsistencyLevel};
use imteval_core::seed::session_seed;
use imteval_core::session::{run_session, OutcomeKind, SessionConfig, SessionLog};
use imteval_core::simulator::PolicyKind;
use imteval_core::text::Lang;
use imteval_service::{AppState, ServiceConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("corpus error: {0}")]
    Corpus(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Corpus(_) => 4,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Corpus(e.to_string())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub corpus: PathBuf,
    pub format: CorpusFormat,
    pub src_lang: Lang,
    pub tgt_lang: Lang,
    pub policies: Vec<PolicyKind>,
    pub backend: BackendSpec,
    pub seed: u64,
    /// Sentences drawn from the corpus; all when absent.
    pub sample: Option<usize>,
    pub logs: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub report_csv: Option<PathBuf>,
    pub sessions_csv: Option<PathBuf>,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
    pub turn_limit: Option<usize>,
    pub consistency: ConsistencyLevel,
}

impl CampaignConfig {
    pub fn new(corpus: PathBuf, src_lang: Lang, tgt_lang: Lang) -> Self {
        Self {
            corpus,
            format: CorpusFormat::Tsv,
            src_lang,
            tgt_lang,
            policies: PolicyKind::ALL.to_vec(),
            backend: BackendSpec::Oracle,
            seed: 0,
            sample: None,
            logs: None,
            report: None,
            report_csv: None,
            sessions_csv: None,
            jobs: 0,
            turn_limit: None,
            consistency: ConsistencyLevel::Word,
        }
    }
}

/// Runs every policy on every corpus pair. Logs come back policy-major in
/// corpus order; each session's seed depends only on the campaign seed and
/// the pair index, so results do not depend on scheduling.
pub fn run_campaign(
    corpus: &ParallelCorpus,
    policies: &[PolicyKind],
    backend: &BackendSpec,
    seed: u64,
    turn_limit: Option<usize>,
) -> Result<Vec<SessionLog>, CliError> {
    if policies.is_empty() {
        return Err(CliError::Config("no policy selected".into()));
    }
    if let Some(i) = corpus.pairs.iter().position(|p| p.reference.as_ref().is_none_or(|r| r.text().is_empty())) {
        return Err(CliError::Corpus(format!("pair {} has no reference to simulate against", i + 1)));
    }
    let label = backend.to_string();
    let jobs: Vec<(PolicyKind, usize)> = policies
        .iter()
        .flat_map(|&p| (0..corpus.pairs.len()).map(move |i| (p, i)))
        .collect();
    jobs.par_iter()
        .map(|&(policy, i)| {
            let pair = &corpus.pairs[i];
            let s = session_seed(seed, i);
            let b = backend
                .instantiate(pair.reference.as_ref(), pair.initial.as_ref(), s)
                .map_err(|e| CliError::Backend(e.to_string()))?;
            let cfg = SessionConfig {
                source: pair.source.clone(),
                reference: pair.reference.clone(),
                tgt_lang: corpus.tgt_lang.clone(),
                policy,
                backend: label.clone(),
                seed: s,
                turn_limit_override: turn_limit,
            };
            run_session(&cfg, &b).map_err(|e| CliError::Corpus(format!("pair {}: {e}", i + 1)))
        })
        .collect()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn write_report(
    report: &CampaignReport,
    json: Option<&Path>,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    if let Some(p) = json {
        let text = serde_json::to_string_pretty(report).expect("report serializes");
        write_file(p, &(text + "\n"))?;
    }
    if let Some(p) = csv {
        write_file(p, &report.to_csv_string())?;
    }
    Ok(())
}

pub struct SimulationOutput {
    pub logs: Vec<SessionLog>,
    pub report: CampaignReport,
}

pub fn cmd_simulate(cfg: &CampaignConfig) -> Result<SimulationOutput, CliError> {
    let corpus = ParallelCorpus::load(&cfg.corpus, cfg.format, cfg.src_lang.clone(), cfg.tgt_lang.clone())?;
    let corpus = match cfg.sample {
        Some(n) => corpus.sample(n, cfg.seed)?,
        None => corpus,
    };
    if corpus.is_empty() {
        return Err(CliError::Corpus("corpus is empty".into()));
    }
    let logs = pool(cfg.jobs)?.install(|| run_campaign(&corpus, &cfg.policies, &cfg.backend, cfg.seed, cfg.turn_limit))?;
    if let Some(p) = &cfg.logs {
        write_logs(p, &logs)?;
    }
    if let Some(p) = &cfg.sessions_csv {
        let mut buf = Vec::new();
        write_session_csv(&logs, &mut buf).expect("in-memory csv");
        write_file(p, &String::from_utf8(buf).expect("csv is utf-8"))?;
    }
    if logs.iter().all(|l| l.outcome.kind == OutcomeKind::BackendFailure) {
        let reason = logs[0].outcome.reason.clone().unwrap_or_default();
        return Err(CliError::Backend(format!("every session failed; first failure: {reason}")));
    }
    let report = aggregate_with(&logs, cfg.consistency).map_err(|e| CliError::Backend(e.to_string()))?;
    write_report(&report, cfg.report.as_deref(), cfg.report_csv.as_deref())?;
    Ok(SimulationOutput { logs, report })
}

pub fn cmd_report(logs: &Path, consistency: ConsistencyLevel) -> Result<CampaignReport, CliError> {
    let logs = read_logs(logs)?;
    aggregate_with(&logs, consistency).map_err(|e| CliError::Corpus(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub service: ServiceConfig,
}

/// Runs the service until interrupted.
pub fn cmd_serve(cfg: ServeConfig) -> Result<(), CliError> {
    let state = AppState::new(cfg.service).map_err(|e| CliError::Config(format!("log file: {e}")))?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(cfg.addr)
            .await
            .map_err(|e| CliError::Config(format!("cannot bind {}: {e}", cfg.addr)))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Config(e.to_string()))?);
        imteval_service::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::Config(e.to_string()))
    })
}
