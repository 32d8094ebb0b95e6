//! Simulated users.
//!
//! A policy looks at the current hypothesis and the reference and either
//! accepts, or emits the edits for the next turn. Every emitted batch yields
//! a template that the reference itself satisfies.

mod plan;
mod policies;

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::mtpe_batch;
use crate::edit::EditBatch;
use crate::seed;
use crate::template::MatchWitness;
use crate::text::{Lang, Tokens};
use plan::build_batch;
use policies::{insert_pieces, l2r_pieces, rand_first, rand_next, RandAnchor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Mtpe,
    L2r,
    Rand,
    L2rI,
    RandI,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Mtpe,
        PolicyKind::L2r,
        PolicyKind::Rand,
        PolicyKind::L2rI,
        PolicyKind::RandI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Mtpe => "MTPE",
            PolicyKind::L2r => "L2r",
            PolicyKind::Rand => "Rand",
            PolicyKind::L2rI => "L2rI",
            PolicyKind::RandI => "RandI",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown policy {0:?}; expected one of mtpe, l2r, rand, l2ri, randi")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mtpe" => Ok(PolicyKind::Mtpe),
            "l2r" => Ok(PolicyKind::L2r),
            "rand" => Ok(PolicyKind::Rand),
            "l2ri" => Ok(PolicyKind::L2rI),
            "randi" => Ok(PolicyKind::RandI),
            _ => Err(UnknownPolicy(s.to_string())),
        }
    }
}

/// Constraint violations a policy puts up with before falling back to
/// post-editing.
pub fn tolerance(kind: PolicyKind) -> u32 {
    match kind {
        PolicyKind::Mtpe | PolicyKind::L2r => 0,
        PolicyKind::Rand | PolicyKind::L2rI | PolicyKind::RandI => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiveUpReason {
    TurnLimit,
    ViolationLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyDecision {
    Accept,
    Edit(EditBatch),
    GiveUp(GiveUpReason),
}

/// One-shot correction of the whole hypothesis.
pub fn mtpe_step(hyp: &str, reference: &str) -> PolicyDecision {
    if hyp == reference {
        return PolicyDecision::Accept;
    }
    PolicyDecision::Edit(mtpe_batch(hyp, reference))
}

pub fn l2r_step(hyp: &str, reference: &str, lang: &Lang) -> PolicyDecision {
    if hyp == reference {
        return PolicyDecision::Accept;
    }
    let (h, r) = (Tokens::new(hyp, lang), Tokens::new(reference, lang));
    PolicyDecision::Edit(build_batch(&h, &r, &l2r_pieces(&h, &r)))
}

pub fn l2ri_step(hyp: &str, reference: &str, lang: &Lang) -> PolicyDecision {
    if hyp == reference {
        return PolicyDecision::Accept;
    }
    let (h, r) = (Tokens::new(hyp, lang), Tokens::new(reference, lang));
    PolicyDecision::Edit(build_batch(&h, &r, &insert_pieces(&h, &r, |_| 0)))
}

pub fn randi_step(hyp: &str, reference: &str, lang: &Lang, rng: &mut ChaCha8Rng) -> PolicyDecision {
    use rand::Rng;
    if hyp == reference {
        return PolicyDecision::Accept;
    }
    let (h, r) = (Tokens::new(hyp, lang), Tokens::new(reference, lang));
    let pieces = insert_pieces(&h, &r, |n| rng.gen_range(0..n));
    PolicyDecision::Edit(build_batch(&h, &r, &pieces))
}

/// A simulated user bound to one reference: policy, random stream and
/// patience bookkeeping.
#[derive(Debug, Clone)]
pub struct UserSimulator {
    kind: PolicyKind,
    reference: String,
    lang: Lang,
    rng: ChaCha8Rng,
    violations: u32,
    anchor: Option<RandAnchor>,
}

impl UserSimulator {
    pub fn new(kind: PolicyKind, reference: &str, lang: Lang, seed: u64) -> Self {
        Self {
            kind,
            reference: reference.to_string(),
            lang,
            rng: seed::rng(seed),
            violations: 0,
            anchor: None,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn violations(&self) -> u32 {
        self.violations
    }

    /// `witness` locates the previous template in `hyp`; it is `None` on the
    /// first move and after a violation.
    pub fn step(&mut self, hyp: &str, witness: Option<&MatchWitness>) -> PolicyDecision {
        let reference = self.reference.as_str();
        match self.kind {
            PolicyKind::Mtpe => mtpe_step(hyp, reference),
            PolicyKind::L2r => l2r_step(hyp, reference, &self.lang),
            PolicyKind::L2rI => l2ri_step(hyp, reference, &self.lang),
            PolicyKind::RandI => randi_step(hyp, reference, &self.lang, &mut self.rng),
            PolicyKind::Rand => {
                if hyp == reference {
                    return PolicyDecision::Accept;
                }
                let (h, r) = (Tokens::new(hyp, &self.lang), Tokens::new(reference, &self.lang));
                let (pieces, anchor) = match (self.anchor, witness) {
                    (Some(a), Some(w)) if a.segment < w.spans.len() => {
                        let (p, a) = rand_next(&h, &r, &self.lang, a, w, &mut self.rng);
                        (p, Some(a))
                    }
                    _ => rand_first(&h, &r, &mut self.rng),
                };
                self.anchor = anchor;
                PolicyDecision::Edit(build_batch(&h, &r, &pieces))
            }
        }
    }

    /// Records a violated template. The policy restarts from the current
    /// hypothesis unless its patience is used up.
    pub fn on_violation(&mut self) -> Result<(), GiveUpReason> {
        self.violations += 1;
        self.anchor = None;
        if self.violations > tolerance(self.kind) {
            Err(GiveUpReason::ViolationLimit)
        } else {
            Ok(())
        }
    }
}
