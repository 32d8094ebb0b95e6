//! Turns a desired template layout into an edit batch over the hypothesis.
//!
//! A layout partitions the hypothesis into regions. A constraint region is
//! rewritten into an exact slice of the reference; a blank region is handed
//! to the machine. Inside a constraint region, anchors pair hypothesis
//! spans with equal reference spans; the material between anchors is edited
//! word-wise, keeping shared leading and trailing whitespace.

use crate::edit::{EditBatch, EditOp};
use crate::text::{CharSpan, Tokens};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Anchor {
    pub hyp: CharSpan,
    pub reference: CharSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Piece {
    Constraint {
        hyp: CharSpan,
        reference: CharSpan,
        anchors: Vec<Anchor>,
    },
    /// An empty span becomes a bare placeholder.
    Blank { hyp: CharSpan },
}

pub(crate) fn build_batch(hyp: &Tokens, reference: &Tokens, pieces: &[Piece]) -> EditBatch {
    let mut ops = Vec::new();
    for piece in pieces {
        match piece {
            Piece::Blank { hyp } => ops.push(EditOp::blank(*hyp)),
            Piece::Constraint {
                hyp: h,
                reference: r,
                anchors,
            } => {
                let (mut hc, mut rc) = (h.start, r.start);
                for a in anchors {
                    debug_assert_eq!(hyp.slice(a.hyp), reference.slice(a.reference));
                    region_edit(
                        hyp,
                        reference,
                        CharSpan::new(hc, a.hyp.start),
                        CharSpan::new(rc, a.reference.start),
                        &mut ops,
                    );
                    hc = a.hyp.end;
                    rc = a.reference.end;
                }
                region_edit(
                    hyp,
                    reference,
                    CharSpan::new(hc, h.end),
                    CharSpan::new(rc, r.end),
                    &mut ops,
                );
            }
        }
    }
    let batch = EditBatch::new(hyp.chars.iter().collect::<String>(), ops);
    debug_assert!(batch.validate().is_ok(), "{batch:?}");
    batch
}

/// Rewrites hypothesis span `h` into the reference text at `r`.
fn region_edit(hyp: &Tokens, reference: &Tokens, h: CharSpan, r: CharSpan, ops: &mut Vec<EditOp>) {
    let hc = &hyp.chars[h.start..h.end];
    let rc = &reference.chars[r.start..r.end];
    let mut lead = 0;
    while lead < hc.len() && lead < rc.len() && hc[lead] == rc[lead] && hc[lead].is_whitespace() {
        lead += 1;
    }
    let mut trail = 0;
    while trail < hc.len() - lead
        && trail < rc.len() - lead
        && hc[hc.len() - 1 - trail] == rc[rc.len() - 1 - trail]
        && hc[hc.len() - 1 - trail].is_whitespace()
    {
        trail += 1;
    }
    let span = CharSpan::new(h.start + lead, h.end - trail);
    let payload: String = rc[lead..rc.len() - trail].iter().collect();
    match (span.is_empty(), payload.is_empty()) {
        (true, true) => {}
        (true, false) => ops.push(EditOp::insert(span.start, payload)),
        (false, true) => ops.push(EditOp::delete(span)),
        (false, false) => ops.push(EditOp::replace(span, payload)),
    }
}
