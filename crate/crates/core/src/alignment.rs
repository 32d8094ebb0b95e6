//! Edit-distance machinery.
//!
//! Character scripts are traced forward over a suffix distance table so that
//! ties resolve at the earliest position: diagonal (match or substitution)
//! first, then deletion, then insertion. Runs of consecutive non-match steps
//! collapse into one costed operation, which is how the one-turn post-editing
//! user is charged.

use serde::{Deserialize, Serialize};

use crate::edit::{EditBatch, EditKind, EditOp};
use crate::text::CharSpan;

/// Unit-cost edit distance between two sequences.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            let best = if x == y {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
            row[j + 1] = best;
        }
    }
    row[b.len()]
}

pub fn levenshtein_str(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    Match,
    Substitute(char),
    DeleteChar,
    InsertChar(char),
}

/// One script step. `src` and `tgt` are the hypothesis and reference
/// positions at which the step applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub kind: StepKind,
    pub src: usize,
    pub tgt: usize,
}

impl Step {
    fn consumes_src(&self) -> bool {
        !matches!(self.kind, StepKind::InsertChar(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CharEditScript {
    pub steps: Vec<Step>,
}

impl CharEditScript {
    pub fn distance(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.kind != StepKind::Match)
            .count()
    }

    /// Replays the script on `hyp`.
    pub fn apply(&self, hyp: &str) -> String {
        let chars: Vec<char> = hyp.chars().collect();
        self.steps
            .iter()
            .filter_map(|s| match s.kind {
                StepKind::Match => Some(chars[s.src]),
                StepKind::Substitute(c) | StepKind::InsertChar(c) => Some(c),
                StepKind::DeleteChar => None,
            })
            .collect()
    }
}

/// Costed span operations for a one-turn correction (never blanks).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SpanScript {
    pub spans: Vec<EditOp>,
}

impl SpanScript {
    pub fn cost(&self) -> u64 {
        self.spans.iter().map(EditOp::cost).sum()
    }

    pub fn span_count(&self) -> usize {
        self.spans.len()
    }

    pub fn into_batch(self, base: impl Into<String>) -> EditBatch {
        EditBatch::new(base, self.spans)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtpeCost {
    pub cost: u64,
    pub span_count: usize,
}

/// Reusable scratch space for character alignment.
#[derive(Debug, Default)]
pub struct Aligner {
    table: Vec<u32>,
    width: usize,
}

impl Aligner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills `table[i][j]` with the distance between `a[i..]` and `b[j..]`.
    fn fill<T: PartialEq>(&mut self, a: &[T], b: &[T]) {
        let (n, m) = (a.len(), b.len());
        self.width = m + 1;
        self.table.clear();
        self.table.resize((n + 1) * (m + 1), 0);
        let w = self.width;
        for j in 0..=m {
            self.table[n * w + j] = (m - j) as u32;
        }
        for i in (0..n).rev() {
            let (cur, below) = self.table[i * w..(i + 2) * w].split_at_mut(w);
            cur[m] = (n - i) as u32;
            let ai = &a[i];
            for j in (0..m).rev() {
                let diag = below[j + 1] + u32::from(*ai != b[j]);
                let del = below[j] + 1;
                let ins = cur[j + 1] + 1;
                cur[j] = diag.min(del).min(ins);
            }
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> u32 {
        self.table[i * self.width + j]
    }

    /// Walks the filled table from the origin, calling `visit` per step.
    fn trace<T: PartialEq + Copy>(&self, a: &[T], b: &[T], mut visit: impl FnMut(TraceStep<T>)) {
        let (n, m) = (a.len(), b.len());
        let (mut i, mut j) = (0, 0);
        while i < n || j < m {
            let here = self.at(i, j);
            if i < n && j < m && here == self.at(i + 1, j + 1) + u32::from(a[i] != b[j]) {
                if a[i] == b[j] {
                    visit(TraceStep::Match(i, j));
                } else {
                    visit(TraceStep::Substitute(i, j, b[j]));
                }
                i += 1;
                j += 1;
            } else if i < n && here == self.at(i + 1, j) + 1 {
                visit(TraceStep::Delete(i, j));
                i += 1;
            } else {
                visit(TraceStep::Insert(i, j, b[j]));
                j += 1;
            }
        }
    }

    pub fn char_script(&mut self, hyp: &[char], reference: &[char]) -> CharEditScript {
        self.fill(hyp, reference);
        let mut steps = Vec::with_capacity(hyp.len().max(reference.len()));
        self.trace(hyp, reference, |step| {
            steps.push(match step {
                TraceStep::Match(src, tgt) => Step {
                    kind: StepKind::Match,
                    src,
                    tgt,
                },
                TraceStep::Substitute(src, tgt, c) => Step {
                    kind: StepKind::Substitute(c),
                    src,
                    tgt,
                },
                TraceStep::Delete(src, tgt) => Step {
                    kind: StepKind::DeleteChar,
                    src,
                    tgt,
                },
                TraceStep::Insert(src, tgt, c) => Step {
                    kind: StepKind::InsertChar(c),
                    src,
                    tgt,
                },
            })
        });
        CharEditScript { steps }
    }

    /// Merged-span cost without materializing the script.
    pub fn mtpe_cost<T: PartialEq + Copy>(&mut self, hyp: &[T], reference: &[T]) -> MtpeCost {
        self.fill(hyp, reference);
        let mut acc = RunAccumulator::default();
        self.trace(hyp, reference, |step| match step {
            TraceStep::Match(..) => acc.close(),
            TraceStep::Substitute(..) => {
                acc.open = true;
                acc.substituted = true;
                acc.typed += 1;
            }
            TraceStep::Delete(..) => {
                acc.open = true;
                acc.deleted = true;
            }
            TraceStep::Insert(..) => {
                acc.open = true;
                acc.inserted = true;
                acc.typed += 1;
            }
        });
        acc.close();
        MtpeCost {
            cost: acc.cost,
            span_count: acc.spans,
        }
    }
}

enum TraceStep<T> {
    Match(usize, usize),
    Substitute(usize, usize, T),
    Delete(usize, usize),
    Insert(usize, usize, T),
}

#[derive(Default)]
struct RunAccumulator {
    open: bool,
    substituted: bool,
    deleted: bool,
    inserted: bool,
    typed: u64,
    cost: u64,
    spans: usize,
}

impl RunAccumulator {
    fn close(&mut self) {
        if !self.open {
            return;
        }
        self.cost += run_cost(self.substituted, self.deleted, self.inserted, self.typed);
        self.spans += 1;
        *self = RunAccumulator {
            cost: self.cost,
            spans: self.spans,
            ..Default::default()
        };
    }
}

fn run_kind(substituted: bool, deleted: bool, inserted: bool) -> EditKind {
    match (substituted, deleted, inserted) {
        (false, true, false) => EditKind::Delete,
        (false, false, true) => EditKind::Insert,
        _ => EditKind::Replace,
    }
}

fn run_cost(substituted: bool, deleted: bool, inserted: bool, typed: u64) -> u64 {
    match run_kind(substituted, deleted, inserted) {
        EditKind::Delete => 1,
        EditKind::Insert => typed,
        _ => typed + 1,
    }
}

pub fn char_script(hyp: &str, reference: &str) -> CharEditScript {
    let hyp: Vec<char> = hyp.chars().collect();
    let reference: Vec<char> = reference.chars().collect();
    Aligner::new().char_script(&hyp, &reference)
}

/// Collapses each maximal run of non-match steps into one operation:
/// deletions only become a delete, insertions only an insert, anything else
/// a replacement typing every inserted or substituted character.
pub fn merge_spans(script: &CharEditScript) -> SpanScript {
    let mut spans = Vec::new();
    let mut run: Vec<&Step> = Vec::new();
    let mut flush = |run: &mut Vec<&Step>| {
        let (Some(first), Some(last)) = (run.first(), run.last()) else {
            return;
        };
        let start = first.src;
        let end = last.src + usize::from(last.consumes_src());
        let mut payload = String::new();
        let (mut substituted, mut deleted, mut inserted) = (false, false, false);
        for step in run.iter() {
            match step.kind {
                StepKind::Substitute(c) => {
                    substituted = true;
                    payload.push(c);
                }
                StepKind::InsertChar(c) => {
                    inserted = true;
                    payload.push(c);
                }
                StepKind::DeleteChar => deleted = true,
                StepKind::Match => unreachable!("match steps end a run"),
            }
        }
        let target = CharSpan::new(start, end);
        spans.push(match run_kind(substituted, deleted, inserted) {
            EditKind::Delete => EditOp::delete(target),
            EditKind::Insert => EditOp::insert(start, payload),
            _ => EditOp::replace(target, payload),
        });
        run.clear();
    };
    for step in &script.steps {
        if step.kind == StepKind::Match {
            flush(&mut run);
        } else {
            run.push(step);
        }
    }
    flush(&mut run);
    SpanScript { spans }
}

/// One-turn post-editing cost and the number of edit spans.
pub fn mtpe_cost(hyp: &str, reference: &str) -> MtpeCost {
    let hyp: Vec<char> = hyp.chars().collect();
    let reference: Vec<char> = reference.chars().collect();
    Aligner::new().mtpe_cost(&hyp, &reference)
}

/// The post-editing correction of `hyp` into `reference` as a batch.
pub fn mtpe_batch(hyp: &str, reference: &str) -> EditBatch {
    merge_spans(&char_script(hyp, reference)).into_batch(hyp)
}

/// Which hypothesis words are correct with respect to the reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectnessMarking {
    pub flags: Vec<bool>,
    /// Reference word matched by each correct hypothesis word.
    pub ref_index: Vec<Option<usize>>,
}

impl CorrectnessMarking {
    /// Matched `(hyp, ref)` word index pairs in increasing order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.ref_index
            .iter()
            .enumerate()
            .filter_map(|(h, r)| r.map(|r| (h, r)))
            .collect()
    }

    pub fn correct_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

/// Marks hypothesis words via a longest common subsequence with the
/// reference. Among equally long subsequences the one using the earliest
/// hypothesis positions wins, then the earliest reference positions.
pub fn mark_correct<S: AsRef<str>>(hyp_words: &[S], ref_words: &[S]) -> CorrectnessMarking {
    let (n, m) = (hyp_words.len(), ref_words.len());
    let w = m + 1;
    let mut lcs = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[i * w + j] = if hyp_words[i].as_ref() == ref_words[j].as_ref() {
                lcs[(i + 1) * w + j + 1] + 1
            } else {
                lcs[(i + 1) * w + j].max(lcs[i * w + j + 1])
            };
        }
    }
    let mut flags = vec![false; n];
    let mut ref_index = vec![None; n];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m && lcs[i * w + j] > 0 {
        let want = lcs[i * w + j];
        let hit = (j..m).find(|&k| {
            hyp_words[i].as_ref() == ref_words[k].as_ref() && lcs[(i + 1) * w + k + 1] + 1 == want
        });
        if let Some(k) = hit {
            flags[i] = true;
            ref_index[i] = Some(k);
            j = k + 1;
        }
        i += 1;
    }
    CorrectnessMarking { flags, ref_index }
}
