//! The dialogue engine: one interactive session from the unconstrained
//! first query to acceptance or post-editing fallback, with its full trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::mtpe_cost;
use crate::backends::{Backend, TranslationRequest};
use crate::edit::{to_tagged, TaggedText};
use crate::simulator::{GiveUpReason, PolicyDecision, PolicyKind, UserSimulator};
use crate::template::{build_template, matches, LexicalTemplate, MatchWitness};
use crate::text::{Lang, Sentence};

pub const HUMAN_POLICY: &str = "human";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("simulated sessions need a reference translation")]
    MissingReference,
    #[error("simulated sessions need a non-empty reference translation")]
    EmptyReference,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub source: Sentence,
    pub reference: Option<Sentence>,
    pub tgt_lang: Lang,
    pub policy: PolicyKind,
    /// Label of the backend serving the session, as echoed in the log.
    pub backend: String,
    pub seed: u64,
    pub turn_limit_override: Option<usize>,
}

/// The configuration as written into a log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub source: String,
    pub src_lang: String,
    pub reference: Option<String>,
    pub tgt_lang: String,
    pub policy: String,
    pub backend: String,
    pub seed: u64,
    pub turn_limit_override: Option<usize>,
    /// Effective limit on constrained turns; absent for human sessions.
    pub turn_limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub i: usize,
    pub template: Option<LexicalTemplate>,
    pub tagged: Option<TaggedText>,
    pub hyp: String,
    pub cost: u64,
    pub violation: bool,
    /// Absent on turns that did not query a backend.
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Success,
    FallbackMtpe,
    BackendFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    TurnLimit,
    ViolationLimit,
    /// A human ticked the post-editing box.
    MtpeCheckbox,
    /// A human submitted text differing from the last hypothesis without
    /// ticking the box.
    ManualEdit,
}

impl FallbackReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FallbackReason::TurnLimit => "turn_limit",
            FallbackReason::ViolationLimit => "violation_limit",
            FallbackReason::MtpeCheckbox => "mtpe_checkbox",
            FallbackReason::ManualEdit => "manual_edit",
        }
    }
}

impl From<GiveUpReason> for FallbackReason {
    fn from(r: GiveUpReason) -> Self {
        match r {
            GiveUpReason::TurnLimit => FallbackReason::TurnLimit,
            GiveUpReason::ViolationLimit => FallbackReason::ViolationLimit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    /// Fallback reason, or the backend error for failed sessions.
    pub reason: Option<String>,
    pub fallback_cost: u64,
}

impl Outcome {
    pub fn success() -> Self {
        Self {
            kind: OutcomeKind::Success,
            reason: None,
            fallback_cost: 0,
        }
    }

    pub fn fallback(reason: FallbackReason, fallback_cost: u64) -> Self {
        Self {
            kind: OutcomeKind::FallbackMtpe,
            reason: Some(reason.as_str().to_string()),
            fallback_cost,
        }
    }

    pub fn backend_failure(message: impl Into<String>) -> Self {
        Self {
            kind: OutcomeKind::BackendFailure,
            reason: Some(message.into()),
            fallback_cost: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub ec: u64,
    pub turns: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub config: ConfigEcho,
    pub turns: Vec<TurnRecord>,
    pub outcome: Outcome,
    pub totals: Totals,
}

impl SessionLog {
    /// Assembles a log, deriving the totals from the turns and outcome.
    pub fn new(config: ConfigEcho, turns: Vec<TurnRecord>, outcome: Outcome) -> Self {
        let totals = Totals {
            ec: turns.iter().map(|t| t.cost).sum::<u64>() + outcome.fallback_cost,
            turns: turns.len(),
            violations: turns.iter().filter(|t| t.violation).count(),
        };
        Self {
            config,
            turns,
            outcome,
            totals,
        }
    }

    pub fn is_failure(&self) -> bool {
        self.outcome.kind == OutcomeKind::BackendFailure
    }

    pub fn final_hypothesis(&self) -> Option<&str> {
        self.turns.last().map(|t| t.hyp.as_str())
    }

    /// Constrained turns, i.e. every turn after the first that queried a
    /// backend.
    pub fn interactive_turns(&self) -> usize {
        self.turns
            .iter()
            .filter(|t| t.i > 0 && t.latency_ms.is_some())
            .count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("log serializes")
    }
}

impl SessionConfig {
    pub fn echo(&self, turn_limit: Option<usize>) -> ConfigEcho {
        ConfigEcho {
            source: self.source.text().to_string(),
            src_lang: self.source.lang().code().to_string(),
            reference: self.reference.as_ref().map(|r| r.text().to_string()),
            tgt_lang: self.tgt_lang.code().to_string(),
            policy: self.policy.name().to_ascii_lowercase(),
            backend: self.backend.clone(),
            seed: self.seed,
            turn_limit_override: self.turn_limit_override,
            turn_limit,
        }
    }
}

/// Constrained turns a simulated user will spend before losing patience:
/// the override when given, else the number of edit spans needed to
/// post-edit the first hypothesis.
pub fn turn_limit(turn_limit_override: Option<usize>, initial_hyp: &str, reference: &str) -> usize {
    turn_limit_override.unwrap_or_else(|| mtpe_cost(initial_hyp, reference).span_count)
}

pub fn run_session(cfg: &SessionConfig, backend: &dyn Backend) -> Result<SessionLog, SessionError> {
    let reference = cfg.reference.as_ref().ok_or(SessionError::MissingReference)?;
    if reference.text().is_empty() {
        return Err(SessionError::EmptyReference);
    }
    let reference = reference.text();
    let mut turns = Vec::new();

    let first = TranslationRequest::initial(cfg.source.clone(), cfg.tgt_lang.clone());
    let resp = match backend.translate(&first) {
        Ok(r) => r,
        Err(e) => {
            return Ok(SessionLog::new(
                cfg.echo(None),
                turns,
                Outcome::backend_failure(e.to_string()),
            ))
        }
    };
    let mut hyp = resp.hypothesis.into_text();
    turns.push(TurnRecord {
        i: 0,
        template: None,
        tagged: None,
        hyp: hyp.clone(),
        cost: 0,
        violation: false,
        latency_ms: Some(resp.latency_ms),
    });
    let limit = turn_limit(cfg.turn_limit_override, &hyp, reference);
    let echo = cfg.echo(Some(limit));
    let mut user = UserSimulator::new(cfg.policy, reference, cfg.tgt_lang.clone(), cfg.seed);

    if cfg.policy == PolicyKind::Mtpe {
        if let PolicyDecision::Edit(batch) = user.step(&hyp, None) {
            let tagged = to_tagged(&batch).ok();
            let template = tagged.as_ref().and_then(|t| build_template(t).ok());
            turns.push(TurnRecord {
                i: 1,
                template,
                tagged,
                hyp: reference.to_string(),
                cost: batch.cost(),
                violation: false,
                latency_ms: None,
            });
        }
        return Ok(SessionLog::new(echo, turns, Outcome::success()));
    }

    let mut witness: Option<MatchWitness> = None;
    let mut constrained = 0;
    let outcome = loop {
        let batch = match user.step(&hyp, witness.as_ref()) {
            PolicyDecision::Accept => break Outcome::success(),
            PolicyDecision::GiveUp(reason) => {
                break Outcome::fallback(reason.into(), mtpe_cost(&hyp, reference).cost)
            }
            PolicyDecision::Edit(batch) => batch,
        };
        if constrained >= limit {
            break Outcome::fallback(FallbackReason::TurnLimit, mtpe_cost(&hyp, reference).cost);
        }
        let tagged = to_tagged(&batch).expect("simulated batches are well formed");
        let template = build_template(&tagged).expect("simulated batches yield templates");
        constrained += 1;
        let req = TranslationRequest::constrained(
            cfg.source.clone(),
            cfg.tgt_lang.clone(),
            template.clone(),
            constrained,
        );
        let resp = match backend.translate(&req) {
            Ok(r) => r,
            Err(e) => break Outcome::backend_failure(e.to_string()),
        };
        hyp = resp.hypothesis.into_text();
        let check = matches(&template, &hyp);
        turns.push(TurnRecord {
            i: constrained,
            template: Some(template),
            tagged: Some(tagged),
            hyp: hyp.clone(),
            cost: batch.cost(),
            violation: !check.satisfied,
            latency_ms: Some(resp.latency_ms),
        });
        if check.satisfied {
            witness = check.witness;
        } else {
            witness = None;
            if let Err(reason) = user.on_violation() {
                break Outcome::fallback(reason.into(), mtpe_cost(&hyp, reference).cost);
            }
        }
    };
    Ok(SessionLog::new(echo, turns, outcome))
}
