//! Edit operations, character tags and the keystroke cost model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::CharSpan;

/// Character inserted into the revised translation for a pure blank insertion.
pub const PLACEHOLDER: char = '*';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("text has {chars} characters but {tags} tags")]
    LengthMismatch { chars: usize, tags: usize },
    #[error("unknown tag {0:?} (expected one of \"kirdb\")")]
    UnknownTag(char),
    #[error("placeholder at position {0} must carry the blank tag")]
    UntaggedPlaceholder(usize),
    #[error("tagged text carries no keep, insert, replace or blank characters")]
    NothingToSend,
    #[error("operation {index} ({kind}) is malformed: {reason}")]
    MalformedOp {
        index: usize,
        kind: EditKind,
        reason: &'static str,
    },
    #[error("operation {index} targets {span} outside or before the preceding operation")]
    Misordered { index: usize, span: CharSpan },
}

/// Per-character provenance tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EditTag {
    Keep,
    Insert,
    Replace,
    Delete,
    Blank,
}

impl EditTag {
    pub const ALL: [EditTag; 5] = [
        EditTag::Keep,
        EditTag::Insert,
        EditTag::Replace,
        EditTag::Delete,
        EditTag::Blank,
    ];

    pub fn as_char(self) -> char {
        match self {
            EditTag::Keep => 'k',
            EditTag::Insert => 'i',
            EditTag::Replace => 'r',
            EditTag::Delete => 'd',
            EditTag::Blank => 'b',
        }
    }

    pub fn from_char(c: char) -> Result<Self, EditError> {
        Ok(match c {
            'k' => EditTag::Keep,
            'i' => EditTag::Insert,
            'r' => EditTag::Replace,
            'd' => EditTag::Delete,
            'b' => EditTag::Blank,
            other => return Err(EditError::UnknownTag(other)),
        })
    }

    /// Kept, inserted and replaced characters are lexical constraints.
    pub fn is_constraint(self) -> bool {
        matches!(self, EditTag::Keep | EditTag::Insert | EditTag::Replace)
    }
}

/// The revised translation with one tag per character.
///
/// Serialized as `{"text": "...", "tags": "..."}` where `tags` has exactly one
/// character from `kirdb` per character of `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaggedTextWire", into = "TaggedTextWire")]
pub struct TaggedText {
    chars: Vec<char>,
    tags: Vec<EditTag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaggedTextWire {
    pub text: String,
    pub tags: String,
}

impl TryFrom<TaggedTextWire> for TaggedText {
    type Error = EditError;

    fn try_from(wire: TaggedTextWire) -> Result<Self, Self::Error> {
        TaggedText::parse(&wire.text, &wire.tags)
    }
}

impl From<TaggedText> for TaggedTextWire {
    fn from(t: TaggedText) -> Self {
        TaggedTextWire {
            text: t.text(),
            tags: t.tag_string(),
        }
    }
}

impl TaggedText {
    pub fn new(chars: Vec<char>, tags: Vec<EditTag>) -> Result<Self, EditError> {
        if chars.len() != tags.len() {
            return Err(EditError::LengthMismatch {
                chars: chars.len(),
                tags: tags.len(),
            });
        }
        if let Some(pos) = chars
            .iter()
            .zip(&tags)
            .position(|(&c, &t)| c == PLACEHOLDER && t != EditTag::Blank)
        {
            return Err(EditError::UntaggedPlaceholder(pos));
        }
        if !tags.iter().any(|t| *t != EditTag::Delete) {
            return Err(EditError::NothingToSend);
        }
        Ok(Self { chars, tags })
    }

    /// Parses the two parallel wire strings.
    pub fn parse(text: &str, tags: &str) -> Result<Self, EditError> {
        let chars: Vec<char> = text.chars().collect();
        let tags = tags
            .chars()
            .map(EditTag::from_char)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(chars, tags)
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn tags(&self) -> &[EditTag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn tag_string(&self) -> String {
        self.tags.iter().map(|t| t.as_char()).collect()
    }

    /// Maximal runs of identical tags as `(tag, start, end)`.
    pub fn runs(&self) -> Vec<(EditTag, usize, usize)> {
        let mut out: Vec<(EditTag, usize, usize)> = Vec::new();
        for (i, &tag) in self.tags.iter().enumerate() {
            match out.last_mut() {
                Some((t, _, end)) if *t == tag => *end = i + 1,
                _ => out.push((tag, i, i + 1)),
            }
        }
        out
    }

    /// Keystroke cost implied by the tags alone: every insert run costs its
    /// length, every replace run its length plus one, every delete and blank
    /// run one. This is what a server charges for a turn it did not see
    /// being typed.
    pub fn cost(&self) -> u64 {
        self.runs()
            .into_iter()
            .map(|(tag, start, end)| {
                let n = (end - start) as u64;
                match tag {
                    EditTag::Keep => 0,
                    EditTag::Insert => n,
                    EditTag::Replace => n + 1,
                    EditTag::Delete | EditTag::Blank => 1,
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Keep,
    Insert,
    Replace,
    Delete,
    BlankFill,
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EditKind::Keep => "keep",
            EditKind::Insert => "insert",
            EditKind::Replace => "replace",
            EditKind::Delete => "delete",
            EditKind::BlankFill => "blank-filling",
        };
        f.write_str(name)
    }
}

/// One user action on the hypothesis. `target` is in pre-edit character
/// coordinates; insertions use an empty span at the insertion point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOp {
    pub kind: EditKind,
    pub target: CharSpan,
    pub payload: String,
}

impl EditOp {
    pub fn keep(target: CharSpan) -> Self {
        Self {
            kind: EditKind::Keep,
            target,
            payload: String::new(),
        }
    }

    pub fn insert(at: usize, payload: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Insert,
            target: CharSpan::at(at),
            payload: payload.into(),
        }
    }

    pub fn replace(target: CharSpan, payload: impl Into<String>) -> Self {
        Self {
            kind: EditKind::Replace,
            target,
            payload: payload.into(),
        }
    }

    pub fn delete(target: CharSpan) -> Self {
        Self {
            kind: EditKind::Delete,
            target,
            payload: String::new(),
        }
    }

    /// Blank over `target`; an empty target inserts a bare placeholder.
    pub fn blank(target: CharSpan) -> Self {
        Self {
            kind: EditKind::BlankFill,
            target,
            payload: String::new(),
        }
    }

    pub fn cost(&self) -> u64 {
        op_cost(self)
    }

    fn check(&self, index: usize) -> Result<(), EditError> {
        let malformed = |reason| EditError::MalformedOp {
            index,
            kind: self.kind,
            reason,
        };
        match self.kind {
            EditKind::Keep if !self.payload.is_empty() => Err(malformed("keep carries a payload")),
            EditKind::Insert if self.payload.is_empty() => Err(malformed("empty insertion")),
            EditKind::Insert if !self.target.is_empty() => {
                Err(malformed("insertion must target an empty span"))
            }
            EditKind::Replace if self.payload.is_empty() => {
                Err(malformed("replacement without payload"))
            }
            EditKind::Replace if self.target.is_empty() => {
                Err(malformed("replacement of an empty span"))
            }
            EditKind::Delete if !self.payload.is_empty() => {
                Err(malformed("deletion carries a payload"))
            }
            EditKind::Delete if self.target.is_empty() => Err(malformed("deletion of nothing")),
            EditKind::BlankFill if !self.payload.is_empty() => {
                Err(malformed("blank carries a payload"))
            }
            _ => Ok(()),
        }
    }
}

/// Keystrokes needed for one operation.
pub fn op_cost(op: &EditOp) -> u64 {
    let typed = op.payload.chars().count() as u64;
    match op.kind {
        EditKind::Keep => 0,
        EditKind::Insert => typed,
        EditKind::Delete => 1,
        EditKind::Replace => typed + 1,
        EditKind::BlankFill => 1,
    }
}

/// Operations applied to one hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditBatch {
    pub base: String,
    pub ops: Vec<EditOp>,
}

impl EditBatch {
    pub fn new(base: impl Into<String>, ops: Vec<EditOp>) -> Self {
        Self {
            base: base.into(),
            ops,
        }
    }

    pub fn cost(&self) -> u64 {
        batch_cost(self)
    }

    /// Checks payload rules, bounds and ordering.
    ///
    /// Targets must be ordered and non-overlapping. Empty-target operations
    /// may share a position. An insertion at the start of an immediately
    /// preceding deletion is accepted as the delete-then-insert form that
    /// [`normalize`] fuses.
    pub fn validate(&self) -> Result<(), EditError> {
        let len = self.base.chars().count();
        let mut cursor = 0;
        let mut prev: Option<&EditOp> = None;
        for (index, op) in self.ops.iter().enumerate() {
            op.check(index)?;
            let span = op.target;
            let fused_form = op.kind == EditKind::Insert
                && prev.is_some_and(|p| p.kind == EditKind::Delete && p.target.start == span.start);
            if span.end > len || span.start > span.end || (span.start < cursor && !fused_form) {
                return Err(EditError::Misordered { index, span });
            }
            cursor = cursor.max(span.end);
            prev = Some(op);
        }
        Ok(())
    }

    /// The text obtained by carrying out the batch.
    pub fn apply(&self) -> Result<String, EditError> {
        let batch = normalize(self);
        batch.validate()?;
        let chars: Vec<char> = batch.base.chars().collect();
        let mut out = String::new();
        let mut cursor = 0;
        for op in &batch.ops {
            out.extend(&chars[cursor..op.target.start.max(cursor)]);
            cursor = cursor.max(op.target.start);
            match op.kind {
                EditKind::Keep => out.extend(&chars[op.target.start..op.target.end]),
                EditKind::Insert | EditKind::Replace => out.push_str(&op.payload),
                EditKind::Delete | EditKind::BlankFill => {}
            }
            cursor = cursor.max(op.target.end);
        }
        out.extend(&chars[cursor..]);
        Ok(out)
    }
}

pub fn batch_cost(batch: &EditBatch) -> u64 {
    batch.ops.iter().map(op_cost).sum()
}

/// Fuses every adjacent delete+insert or insert+delete pair acting on one
/// contiguous span into a single replacement. Other operations and the order
/// are left untouched.
pub fn normalize(batch: &EditBatch) -> EditBatch {
    let mut ops: Vec<EditOp> = Vec::with_capacity(batch.ops.len());
    let mut iter = batch.ops.iter().peekable();
    while let Some(op) = iter.next() {
        if let Some(next) = iter.peek() {
            if let Some(fused) = fuse(op, next) {
                ops.push(fused);
                iter.next();
                continue;
            }
        }
        ops.push(op.clone());
    }
    EditBatch {
        base: batch.base.clone(),
        ops,
    }
}

fn fuse(a: &EditOp, b: &EditOp) -> Option<EditOp> {
    let (del, ins) = match (a.kind, b.kind) {
        (EditKind::Delete, EditKind::Insert) => (a, b),
        (EditKind::Insert, EditKind::Delete) => (b, a),
        _ => return None,
    };
    let at = ins.target.start;
    if at == del.target.start || at == del.target.end {
        Some(EditOp::replace(del.target, ins.payload.clone()))
    } else {
        None
    }
}

/// Renders a batch as the tagged revised translation.
///
/// Characters outside every target are kept. Replaced base characters are
/// dropped in favour of the payload; deleted and blanked base characters are
/// retained with their tag; an empty blank emits a single placeholder.
pub fn to_tagged(batch: &EditBatch) -> Result<TaggedText, EditError> {
    let batch = normalize(batch);
    batch.validate()?;
    let base: Vec<char> = batch.base.chars().collect();
    let mut chars = Vec::new();
    let mut tags = Vec::new();
    let mut push = |slice: &mut dyn Iterator<Item = char>, tag: EditTag| {
        for c in slice {
            chars.push(c);
            tags.push(tag);
        }
    };
    let mut cursor = 0;
    for op in &batch.ops {
        let span = op.target;
        if span.start > cursor {
            push(&mut base[cursor..span.start].iter().copied(), EditTag::Keep);
            cursor = span.start;
        }
        match op.kind {
            EditKind::Keep => push(&mut base[span.start..span.end].iter().copied(), EditTag::Keep),
            EditKind::Insert => push(&mut op.payload.chars(), EditTag::Insert),
            EditKind::Replace => push(&mut op.payload.chars(), EditTag::Replace),
            EditKind::Delete => {
                push(&mut base[span.start..span.end].iter().copied(), EditTag::Delete)
            }
            EditKind::BlankFill if span.is_empty() => {
                push(&mut std::iter::once(PLACEHOLDER), EditTag::Blank)
            }
            EditKind::BlankFill => {
                push(&mut base[span.start..span.end].iter().copied(), EditTag::Blank)
            }
        }
        cursor = cursor.max(span.end);
    }
    push(&mut base[cursor..].iter().copied(), EditTag::Keep);
    TaggedText::new(chars, tags)
}
