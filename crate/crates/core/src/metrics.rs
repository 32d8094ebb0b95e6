//! Session metrics (EC, SR, Con, AT, RT) and campaign aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::levenshtein;
use crate::session::{OutcomeKind, SessionLog};
use crate::text::{Lang, Tokens};

/// Breakdown key matching every policy or every backend.
pub const ALL: &str = "*";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("backend failure logs carry no metrics")]
    FailedSession,
    #[error("no completed sessions to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyLevel {
    #[default]
    Word,
    Char,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub ec: u64,
    pub success: bool,
    /// Absent when the backend produced fewer than two hypotheses.
    pub consistency: Option<f64>,
    pub at: usize,
    pub rt_ms: f64,
}

pub fn session_metrics(log: &SessionLog) -> Result<SessionMetrics, MetricsError> {
    session_metrics_with(log, ConsistencyLevel::Word)
}

pub fn session_metrics_with(
    log: &SessionLog,
    level: ConsistencyLevel,
) -> Result<SessionMetrics, MetricsError> {
    if log.outcome.kind == OutcomeKind::BackendFailure {
        return Err(MetricsError::FailedSession);
    }
    let lang = Lang::new(log.config.tgt_lang.clone());
    // Only backend outputs count: turns without latency were typed by the user.
    let outputs: Vec<&str> = log
        .turns
        .iter()
        .filter(|t| t.latency_ms.is_some())
        .map(|t| t.hyp.as_str())
        .collect();
    let consistency = (outputs.len() >= 2).then(|| {
        let total: usize = outputs
            .windows(2)
            .map(|w| distance(w[0], w[1], &lang, level))
            .sum();
        total as f64 / (outputs.len() - 1) as f64
    });
    let latencies: Vec<f64> = log.turns.iter().filter_map(|t| t.latency_ms).collect();
    let rt_ms = if latencies.is_empty() {
        0.0
    } else {
        latencies.iter().sum::<f64>() / latencies.len() as f64
    };
    Ok(SessionMetrics {
        ec: log.totals.ec,
        success: log.outcome.kind == OutcomeKind::Success,
        consistency,
        at: log.turns.len(),
        rt_ms,
    })
}

fn distance(a: &str, b: &str, lang: &Lang, level: ConsistencyLevel) -> usize {
    match level {
        ConsistencyLevel::Word => levenshtein(&Tokens::new(a, lang).words(), &Tokens::new(b, lang).words()),
        ConsistencyLevel::Char => {
            let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            levenshtein(&a, &b)
        }
    }
}

/// One breakdown cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub backend: String,
    /// Sessions entering the means (failures excluded).
    pub n: usize,
    pub failures: usize,
    pub ec: f64,
    pub sr: f64,
    /// Mean over sessions that have a consistency value; absent if none do.
    pub con: Option<f64>,
    pub at: f64,
    pub rt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub n_sessions: usize,
    pub failures: usize,
    pub overall: ReportRow,
    pub by_policy: Vec<ReportRow>,
    pub by_backend: Vec<ReportRow>,
    /// One row per (policy, backend) pair.
    pub cells: Vec<ReportRow>,
}

#[derive(Default)]
struct Acc {
    n: usize,
    failures: usize,
    ec: f64,
    successes: usize,
    con: f64,
    con_n: usize,
    at: f64,
    rt: f64,
}

impl Acc {
    fn add(&mut self, m: Option<&SessionMetrics>) {
        let Some(m) = m else {
            self.failures += 1;
            return;
        };
        self.n += 1;
        self.ec += m.ec as f64;
        self.successes += usize::from(m.success);
        if let Some(c) = m.consistency {
            self.con += c;
            self.con_n += 1;
        }
        self.at += m.at as f64;
        self.rt += m.rt_ms;
    }

    fn row(&self, policy: &str, backend: &str) -> ReportRow {
        let n = self.n.max(1) as f64;
        ReportRow {
            policy: policy.to_string(),
            backend: backend.to_string(),
            n: self.n,
            failures: self.failures,
            ec: self.ec / n,
            sr: self.successes as f64 / n,
            con: (self.con_n > 0).then(|| self.con / self.con_n as f64),
            at: self.at / n,
            rt_ms: self.rt / n,
        }
    }
}

pub fn aggregate(logs: &[SessionLog]) -> Result<CampaignReport, MetricsError> {
    aggregate_with(logs, ConsistencyLevel::Word)
}

pub fn aggregate_with(
    logs: &[SessionLog],
    level: ConsistencyLevel,
) -> Result<CampaignReport, MetricsError> {
    let mut overall = Acc::default();
    let mut by_policy: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut by_backend: BTreeMap<&str, Acc> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str), Acc> = BTreeMap::new();
    for log in logs {
        let m = session_metrics_with(log, level).ok();
        let (p, b) = (log.config.policy.as_str(), log.config.backend.as_str());
        overall.add(m.as_ref());
        by_policy.entry(p).or_default().add(m.as_ref());
        by_backend.entry(b).or_default().add(m.as_ref());
        cells.entry((p, b)).or_default().add(m.as_ref());
    }
    if overall.n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(CampaignReport {
        n_sessions: logs.len(),
        failures: overall.failures,
        overall: overall.row(ALL, ALL),
        by_policy: by_policy.iter().map(|(p, a)| a.row(p, ALL)).collect(),
        by_backend: by_backend.iter().map(|(b, a)| a.row(ALL, b)).collect(),
        cells: cells.iter().map(|((p, b), a)| a.row(p, b)).collect(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CampaignReport {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.cells
            .iter()
            .chain(&self.by_policy)
            .chain(&self.by_backend)
            .chain(std::iter::once(&self.overall))
    }

    pub fn row(&self, policy: &str, backend: &str) -> Option<&ReportRow> {
        self.rows().find(|r| r.policy == policy && r.backend == backend)
    }

    /// Flat CSV, one row per breakdown cell.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["policy", "backend", "n", "ec", "sr", "con", "at", "rt_ms"])?;
        for r in self.rows() {
            w.write_record([
                r.policy.clone(),
                r.backend.clone(),
                r.n.to_string(),
                r.ec.to_string(),
                r.sr.to_string(),
                fmt_opt(r.con),
                r.at.to_string(),
                r.rt_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory csv");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Fixed-width table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<8} {:<28} {:>5} {:>9} {:>7} {:>7} {:>6} {:>10}\n",
            "policy", "backend", "n", "EC", "SR", "Con", "AT", "RT(ms)"
        );
        for r in self.rows() {
            s.push_str(&format!(
                "{:<8} {:<28} {:>5} {:>9.2} {:>6.1}% {:>7} {:>6.2} {:>10.3}\n",
                r.policy,
                r.backend,
                r.n,
                r.ec,
                r.sr * 100.0,
                r.con.map(|c| format!("{c:.2}")).unwrap_or_else(|| "-".into()),
                r.at,
                r.rt_ms
            ));
        }
        if self.failures > 0 {
            s.push_str(&format!("backend failures: {}\n", self.failures));
        }
        s
    }
}

/// Raw per-session export for external analysis.
pub fn write_session_csv<W: Write>(logs: &[SessionLog], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "index", "policy", "backend", "seed", "outcome", "reason", "ec", "success", "con", "at",
        "rt_ms",
    ])?;
    for (i, log) in logs.iter().enumerate() {
        let kind = serde_json::to_value(log.outcome.kind).expect("kind serializes");
        let m = session_metrics(log).ok();
        w.write_record([
            i.to_string(),
            log.config.policy.clone(),
            log.config.backend.clone(),
            log.config.seed.to_string(),
            kind.as_str().unwrap_or_default().to_string(),
            log.outcome.reason.clone().unwrap_or_default(),
            m.as_ref().map(|m| m.ec.to_string()).unwrap_or_default(),
            m.as_ref().map(|m| m.success.to_string()).unwrap_or_default(),
            fmt_opt(m.as_ref().and_then(|m| m.consistency)),
            m.as_ref().map(|m| m.at.to_string()).unwrap_or_default(),
            m.as_ref().map(|m| m.rt_ms.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
