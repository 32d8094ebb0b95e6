//! Lexical-constraint templates: construction from tagged text, satisfaction
//! checking and prompt rendering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edit::{EditTag, TaggedText};
use crate::text::CharSpan;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template has no segments")]
    Empty,
    #[error("constraint segment {0} is empty")]
    EmptyConstraint(usize),
    #[error("segments {0} and {1} are adjacent and of the same kind")]
    Unmerged(usize, usize),
    #[error("blank segment must be encoded as {{\"b\":true}}")]
    FalseBlank,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Segment {
    Constraint {
        #[serde(rename = "c")]
        text: String,
    },
    Blank {
        #[serde(rename = "b")]
        blank: bool,
    },
}

impl Segment {
    pub fn constraint(text: impl Into<String>) -> Self {
        Segment::Constraint { text: text.into() }
    }

    pub fn blank() -> Self {
        Segment::Blank { blank: true }
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Segment::Blank { .. })
    }

    pub fn constraint_text(&self) -> Option<&str> {
        match self {
            Segment::Constraint { text } => Some(text),
            Segment::Blank { .. } => None,
        }
    }
}

/// Deleted text recorded next to the segment it was removed from.
///
/// `at` is the index of the segment the deletion trails or sits inside; a
/// deletion before any segment points at the first one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hint {
    pub at: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TemplateWire")]
pub struct LexicalTemplate {
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub hints: Vec<Hint>,
}

#[derive(Deserialize)]
struct TemplateWire {
    segments: Vec<Segment>,
    #[serde(default)]
    hints: Vec<Hint>,
}

impl TryFrom<TemplateWire> for LexicalTemplate {
    type Error = TemplateError;

    fn try_from(wire: TemplateWire) -> Result<Self, Self::Error> {
        LexicalTemplate::new(wire.segments, wire.hints)
    }
}

impl LexicalTemplate {
    pub fn new(segments: Vec<Segment>, hints: Vec<Hint>) -> Result<Self, TemplateError> {
        let tpl = Self { segments, hints };
        tpl.validate()?;
        Ok(tpl)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.segments.is_empty() {
            return Err(TemplateError::Empty);
        }
        for (i, seg) in self.segments.iter().enumerate() {
            match seg {
                Segment::Constraint { text } if text.is_empty() => {
                    return Err(TemplateError::EmptyConstraint(i))
                }
                Segment::Blank { blank: false } => return Err(TemplateError::FalseBlank),
                _ => {}
            }
            if i > 0 && self.segments[i - 1].is_blank() == seg.is_blank() {
                return Err(TemplateError::Unmerged(i - 1, i));
            }
        }
        Ok(())
    }

    pub fn constraints(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(Segment::constraint_text)
    }

    pub fn blank_count(&self) -> usize {
        self.segments.iter().filter(|s| s.is_blank()).count()
    }

    pub fn has_blank(&self) -> bool {
        self.blank_count() > 0
    }

    /// `[Constraint P, Blank]` or `[Constraint P]` or `[Blank]`: the shapes a
    /// prefix-constrained decoder can serve. Returns the prefix.
    pub fn as_prefix(&self) -> Option<&str> {
        match self.segments.as_slice() {
            [Segment::Blank { .. }] => Some(""),
            [Segment::Constraint { text }] => Some(text),
            [Segment::Constraint { text }, Segment::Blank { .. }] => Some(text),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("template serializes")
    }
}

/// Converts a tagged revised translation into a template.
///
/// Runs of kept, inserted and replaced characters become constraints, runs
/// of blank characters one blank each, and deleted runs are recorded as
/// hints without splitting the surrounding constraint.
pub fn build_template(tagged: &TaggedText) -> Result<LexicalTemplate, TemplateError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut hints: Vec<Hint> = Vec::new();
    let mut open = String::new();
    let mut deleted = String::new();

    let flush_deleted = |deleted: &mut String, hints: &mut Vec<Hint>, at: usize| {
        if !deleted.is_empty() {
            hints.push(Hint {
                at,
                text: std::mem::take(deleted),
            });
        }
    };

    for (&c, &tag) in tagged.chars().iter().zip(tagged.tags()) {
        match tag {
            EditTag::Keep | EditTag::Insert | EditTag::Replace => {
                flush_deleted(&mut deleted, &mut hints, segments.len());
                open.push(c);
            }
            EditTag::Delete => deleted.push(c),
            EditTag::Blank => {
                if !open.is_empty() {
                    flush_deleted(&mut deleted, &mut hints, segments.len());
                    segments.push(Segment::constraint(std::mem::take(&mut open)));
                }
                if !matches!(segments.last(), Some(Segment::Blank { .. })) {
                    segments.push(Segment::blank());
                }
                flush_deleted(&mut deleted, &mut hints, segments.len() - 1);
            }
        }
    }
    if !open.is_empty() {
        flush_deleted(&mut deleted, &mut hints, segments.len());
        segments.push(Segment::constraint(open));
    }
    flush_deleted(&mut deleted, &mut hints, segments.len());
    LexicalTemplate::new(segments, hints)
}

/// Where each segment landed in a candidate that satisfies a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchWitness {
    /// One character span per segment, in order.
    pub spans: Vec<CharSpan>,
    /// Text assigned to each blank, in order.
    pub fills: Vec<String>,
}

impl MatchWitness {
    /// Spans of the constraint segments only.
    pub fn constraint_spans(&self, tpl: &LexicalTemplate) -> Vec<CharSpan> {
        tpl.segments
            .iter()
            .zip(&self.spans)
            .filter(|(seg, _)| !seg.is_blank())
            .map(|(_, span)| *span)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub satisfied: bool,
    pub witness: Option<MatchWitness>,
}

impl MatchResult {
    pub fn fills(&self) -> Option<&[String]> {
        self.witness.as_ref().map(|w| w.fills.as_slice())
    }
}

/// Decides whether `candidate` is the in-order concatenation of the
/// template's constraints with arbitrary (possibly empty) strings in place
/// of the blanks.
///
/// The witness places every constraint as early as the rest of the template
/// allows.
pub fn matches(tpl: &LexicalTemplate, candidate: &str) -> MatchResult {
    let chars: Vec<char> = candidate.chars().collect();
    let segs: Vec<Option<Vec<char>>> = tpl
        .segments
        .iter()
        .map(|s| s.constraint_text().map(|t| t.chars().collect()))
        .collect();
    let len = chars.len();
    let w = len + 1;
    // feasible[s * w + p]: segments s.. can consume chars[p..] exactly.
    let mut feasible = vec![false; (segs.len() + 1) * w];
    feasible[segs.len() * w + len] = true;
    for s in (0..segs.len()).rev() {
        match &segs[s] {
            None => {
                let mut any = false;
                for p in (0..=len).rev() {
                    any |= feasible[(s + 1) * w + p];
                    feasible[s * w + p] = any;
                }
            }
            Some(text) => {
                for p in 0..=len {
                    let end = p + text.len();
                    feasible[s * w + p] =
                        end <= len && feasible[(s + 1) * w + end] && chars[p..end] == text[..];
                }
            }
        }
    }
    if !feasible[0] {
        return MatchResult {
            satisfied: false,
            witness: None,
        };
    }
    let mut spans = Vec::with_capacity(segs.len());
    let mut fills = Vec::new();
    let mut p = 0;
    for (s, seg) in segs.iter().enumerate() {
        let end = match seg {
            Some(text) => p + text.len(),
            None => (p..=len)
                .find(|&q| feasible[(s + 1) * w + q])
                .expect("feasible blank has a continuation"),
        };
        if seg.is_none() {
            fills.push(chars[p..end].iter().collect());
        }
        spans.push(CharSpan::new(p, end));
        p = end;
    }
    MatchResult {
        satisfied: true,
        witness: Some(MatchWitness { spans, fills }),
    }
}

/// Renders the template for a prompt: constraints verbatim, each blank as
/// `_`, neighbouring segments separated by a single space.
pub fn to_prompt_string(tpl: &LexicalTemplate) -> String {
    tpl.segments
        .iter()
        .filter_map(|seg| match seg {
            Segment::Blank { .. } => Some("_"),
            Segment::Constraint { text } => {
                let t = text.trim();
                (!t.is_empty()).then_some(t)
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
