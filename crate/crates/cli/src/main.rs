use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use imteval_cli::{cmd_report, cmd_serve, cmd_simulate, write_report, CampaignConfig, CliError, ServeConfig};
use imteval_core::backends::BackendSpec;
use imteval_core::corpus::{CorpusFormat, ParallelCorpus};
use imteval_core::metrics::ConsistencyLevel;
use imteval_core::simulator::PolicyKind;
use imteval_core::text::Lang;
use imteval_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "imteval", version, about = "Interactive machine translation evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Jsonl,
}

impl From<Format> for CorpusFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => CorpusFormat::Tsv,
            Format::Jsonl => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Word,
    Char,
}

impl From<Level> for ConsistencyLevel {
    fn from(l: Level) -> Self {
        match l {
            Level::Word => ConsistencyLevel::Word,
            Level::Char => ConsistencyLevel::Char,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run simulated users over a corpus and score the sessions.
    Simulate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
        /// Comma-separated: mtpe, l2r, rand, l2ri, randi.
        #[arg(long, value_delimiter = ',', default_value = "l2r,rand,l2ri,randi")]
        policy: Vec<PolicyKind>,
        /// oracle | prefix[:we=R] | noisy:we=R,vr=R | wire:URL | llm:URL
        #[arg(long, default_value = "noisy:we=0.3,vr=0.1")]
        backend: BackendSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sample: Option<usize>,
        /// Session logs (JSONL).
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Campaign report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        report_csv: Option<PathBuf>,
        /// One row per session for external analysis.
        #[arg(long)]
        sessions_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        turn_limit: Option<usize>,
        #[arg(long, value_enum, default_value = "word")]
        consistency: Level,
    },
    /// Recompute a campaign report from session logs.
    Report {
        logs: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        report_csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "word")]
        consistency: Level,
    },
    /// Host the human evaluation service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value = "prefix")]
        backend: BackendSpec,
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
        /// Sentences clients may open by index.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
        /// Finished session logs are appended here.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            corpus,
            format,
            src,
            tgt,
            policy,
            backend,
            seed,
            sample,
            logs,
            report,
            report_csv,
            sessions_csv,
            jobs,
            turn_limit,
            consistency,
        } => {
            let mut cfg = CampaignConfig::new(corpus, Lang::new(src), Lang::new(tgt));
            cfg.format = format.into();
            cfg.policies = policy;
            cfg.backend = backend;
            cfg.seed = seed;
            cfg.sample = sample;
            cfg.logs = logs;
            cfg.report = report;
            cfg.report_csv = report_csv;
            cfg.sessions_csv = sessions_csv;
            cfg.jobs = jobs;
            cfg.turn_limit = turn_limit;
            cfg.consistency = consistency.into();
            let out = cmd_simulate(&cfg)?;
            print!("{}", out.report.to_table());
        }
        Command::Report {
            logs,
            report,
            report_csv,
            consistency,
        } => {
            let r = cmd_report(&logs, consistency.into())?;
            write_report(&r, report.as_deref(), report_csv.as_deref())?;
            print!("{}", r.to_table());
        }
        Command::Serve {
            addr,
            backend,
            src,
            tgt,
            corpus,
            format,
            logs,
        } => {
            let (src, tgt) = (Lang::new(src), Lang::new(tgt));
            let mut service = ServiceConfig::new(backend, src.clone(), tgt.clone());
            service.corpus = corpus
                .map(|p| ParallelCorpus::load(&p, format.into(), src, tgt))
                .transpose()?;
            service.log_path = logs;
            cmd_serve(ServeConfig { addr, service })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("imteval: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
