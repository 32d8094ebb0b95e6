use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::plan::{Anchor, Piece};
use crate::alignment::mark_correct;
use crate::template::MatchWitness;
use crate::text::{tokenize_chars, CharSpan, Lang, Tokens};

fn word_eq(h: &Tokens, i: usize, r: &Tokens, j: usize) -> bool {
    let (a, b) = (h.seg.words[i], r.seg.words[j]);
    h.chars[a.start..a.end] == r.chars[b.start..b.end]
}

fn word_anchor(h: &Tokens, i: usize, r: &Tokens, j: usize) -> Anchor {
    Anchor {
        hyp: h.seg.words[i],
        reference: r.seg.words[j],
    }
}

/// Reference text of words `lo..hi`, without outer separators.
fn ref_words_span(r: &Tokens, lo: usize, hi: usize) -> CharSpan {
    CharSpan::new(r.seg.words[lo].start, r.seg.words[hi - 1].end)
}

/// Corrects the first wrong word of the longest correct word prefix and
/// blanks everything after it.
pub(crate) fn l2r_pieces(h: &Tokens, r: &Tokens) -> Vec<Piece> {
    let (n, m) = (h.word_count(), r.word_count());
    if m == 0 {
        return vec![Piece::Blank {
            hyp: CharSpan::new(0, h.len()),
        }];
    }
    let mut p = 0;
    while p < n && p < m && word_eq(h, p, r, p) {
        p += 1;
    }
    let anchors = (0..p).map(|i| word_anchor(h, i, r, i)).collect();
    let (h_end, r_end) = if p == m {
        (h.seg.words[p - 1].end, r.seg.words[p - 1].end)
    } else if p == n {
        (h.len(), r.seg.words[p].end)
    } else {
        (h.seg.words[p].end, r.seg.words[p].end)
    };
    vec![
        Piece::Constraint {
            hyp: CharSpan::new(0, h_end),
            reference: CharSpan::new(0, r_end),
            anchors,
        },
        Piece::Blank {
            hyp: CharSpan::new(h_end, h.len()),
        },
    ]
}

/// Rand's record of the reference words its single constraint covers and
/// which template segment holds that constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RandAnchor {
    pub lo: usize,
    pub hi: usize,
    pub segment: usize,
}

fn rand_layout(
    h: &Tokens,
    r: &Tokens,
    left: (usize, usize),
    right: (usize, usize),
    anchors: Vec<Anchor>,
) -> (Vec<Piece>, RandAnchor) {
    let ((left_start, lo), (right_end, hi)) = (left, right);
    let mut pieces = Vec::with_capacity(3);
    if left_start > 0 || lo > 0 {
        pieces.push(Piece::Blank {
            hyp: CharSpan::new(0, left_start),
        });
    }
    let segment = pieces.len();
    pieces.push(Piece::Constraint {
        hyp: CharSpan::new(left_start, right_end),
        reference: ref_words_span(r, lo, hi),
        anchors,
    });
    if right_end < h.len() || hi < r.word_count() {
        pieces.push(Piece::Blank {
            hyp: CharSpan::new(right_end, h.len()),
        });
    }
    (pieces, RandAnchor { lo, hi, segment })
}

/// Keeps one randomly chosen correct word and blanks both sides.
pub(crate) fn rand_first(h: &Tokens, r: &Tokens, rng: &mut ChaCha8Rng) -> (Vec<Piece>, Option<RandAnchor>) {
    let pairs = mark_correct(&h.words(), &r.words()).pairs();
    if pairs.is_empty() {
        let anchor = (r.word_count() > 0).then_some(RandAnchor {
            lo: 0,
            hi: 1,
            segment: 0,
        });
        return (l2r_pieces(h, r), anchor);
    }
    let (c, k) = pairs[rng.gen_range(0..pairs.len())];
    let w = h.seg.words[c];
    let (pieces, anchor) = rand_layout(
        h,
        r,
        (w.start, k),
        (w.end, k + 1),
        vec![word_anchor(h, c, r, k)],
    );
    (pieces, Some(anchor))
}

struct Walk {
    anchors: Vec<Anchor>,
    /// Hypothesis position where the constraint region now ends (right
    /// walk) or starts (left walk).
    extent: usize,
    /// New reference word bound of the constraint.
    bound: usize,
    complete: bool,
}

fn walk_right(h: &Tokens, r: &Tokens, per_char: bool, ce: usize, b: usize) -> Walk {
    let seg = tokenize_chars(&h.chars[ce..], per_char);
    let abs = |s: CharSpan| CharSpan::new(s.start + ce, s.end + ce);
    let m = r.word_count();
    let (mut anchors, mut extent, mut t, mut pos) = (Vec::new(), ce, b, 0);
    loop {
        if t == m {
            return Walk { anchors, extent, bound: m, complete: true };
        }
        if pos < seg.words.len() {
            let w = abs(seg.words[pos]);
            let sep = abs(seg.separators[pos]);
            let rs = r.seg.separators[t];
            let rw = r.seg.words[t];
            if h.chars[w.start..w.end] == r.chars[rw.start..rw.end]
                && h.chars[sep.start..sep.end] == r.chars[rs.start..rs.end]
            {
                anchors.push(Anchor { hyp: w, reference: rw });
                extent = w.end;
                t += 1;
                pos += 1;
                continue;
            }
            return Walk { anchors, extent: w.end, bound: t + 1, complete: false };
        }
        return Walk { anchors, extent, bound: t + 1, complete: false };
    }
}

fn walk_left(h: &Tokens, r: &Tokens, per_char: bool, cs: usize, a: usize) -> Walk {
    let seg = tokenize_chars(&h.chars[..cs], per_char);
    let (mut anchors, mut extent, mut t, mut pos) = (Vec::new(), cs, a, seg.words.len());
    loop {
        if t == 0 {
            anchors.reverse();
            return Walk { anchors, extent, bound: 0, complete: true };
        }
        if pos > 0 {
            let w = seg.words[pos - 1];
            let sep = seg.separators[pos];
            let rs = r.seg.separators[t];
            let rw = r.seg.words[t - 1];
            if h.chars[w.start..w.end] == r.chars[rw.start..rw.end]
                && h.chars[sep.start..sep.end] == r.chars[rs.start..rs.end]
            {
                anchors.push(Anchor { hyp: w, reference: rw });
                extent = w.start;
                t -= 1;
                pos -= 1;
                continue;
            }
            anchors.reverse();
            return Walk { anchors, extent: w.start, bound: t - 1, complete: false };
        }
        anchors.reverse();
        return Walk { anchors, extent, bound: t - 1, complete: false };
    }
}

/// Grows the constraint by one corrected word in a random direction.
pub(crate) fn rand_next(
    h: &Tokens,
    r: &Tokens,
    lang: &Lang,
    anchor: RandAnchor,
    witness: &MatchWitness,
    rng: &mut ChaCha8Rng,
) -> (Vec<Piece>, RandAnchor) {
    let span = witness.spans[anchor.segment];
    let per_char = lang.is_per_character();
    let middle = Anchor {
        hyp: span,
        reference: ref_words_span(r, anchor.lo, anchor.hi),
    };
    debug_assert_eq!(h.slice(middle.hyp), r.slice(middle.reference));
    let go_right = rng.gen_bool(0.5);
    let walk = |right: bool| {
        if right {
            walk_right(h, r, per_char, span.end, anchor.hi)
        } else {
            walk_left(h, r, per_char, span.start, anchor.lo)
        }
    };
    let first = walk(go_right);
    let second = first.complete.then(|| walk(!go_right));
    let (right, left) = if go_right {
        (Some(first), second)
    } else {
        (second, Some(first))
    };
    let (left_start, lo, mut anchors) = match left {
        Some(w) => (w.extent, w.bound, w.anchors),
        None => (span.start, anchor.lo, Vec::new()),
    };
    anchors.push(middle);
    let (right_end, hi) = match right {
        Some(w) => {
            anchors.extend(w.anchors);
            (w.extent, w.bound)
        }
        None => (span.end, anchor.hi),
    };
    rand_layout(h, r, (left_start, lo), (right_end, hi), anchors)
}

/// Blanks every incorrect stretch and types one missing reference word at
/// the start of the gap picked by `choose` among gaps missing reference
/// words.
pub(crate) fn insert_pieces(
    h: &Tokens,
    r: &Tokens,
    choose: impl FnOnce(usize) -> usize,
) -> Vec<Piece> {
    let pairs = mark_correct(&h.words(), &r.words()).pairs();
    let (n, m) = (h.word_count(), r.word_count());
    struct Gap {
        hreg: CharSpan,
        rreg: CharSpan,
        active: bool,
        r_lo: usize,
        r_words: usize,
    }
    let gaps: Vec<Gap> = (0..=pairs.len())
        .map(|g| {
            let prev = g.checked_sub(1).map(|i| pairs[i]);
            let next = pairs.get(g).copied();
            let h_lo = prev.map_or(0, |p| p.0 + 1);
            let h_hi = next.map_or(n, |p| p.0);
            let r_lo = prev.map_or(0, |p| p.1 + 1);
            let r_hi = next.map_or(m, |p| p.1);
            let hreg = CharSpan::new(
                prev.map_or(0, |p| h.seg.words[p.0].end),
                next.map_or(h.len(), |p| h.seg.words[p.0].start),
            );
            let rreg = CharSpan::new(
                prev.map_or(0, |p| r.seg.words[p.1].end),
                next.map_or(r.len(), |p| r.seg.words[p.1].start),
            );
            Gap {
                hreg,
                rreg,
                active: h_hi > h_lo || r_hi > r_lo,
                r_lo,
                r_words: r_hi - r_lo,
            }
        })
        .collect();
    let candidates: Vec<usize> = (0..gaps.len()).filter(|&g| gaps[g].r_words > 0).collect();
    let target = (!candidates.is_empty()).then(|| candidates[choose(candidates.len())]);

    struct Open {
        h: usize,
        r: usize,
        anchors: Vec<Anchor>,
    }
    fn close(o: Open, h_end: usize, r_end: usize, pieces: &mut Vec<Piece>) {
        let hyp = CharSpan::new(o.h, h_end);
        let reference = CharSpan::new(o.r, r_end);
        if !(hyp.is_empty() && reference.is_empty()) {
            pieces.push(Piece::Constraint {
                hyp,
                reference,
                anchors: o.anchors,
            });
        }
    }
    let mut pieces = Vec::new();
    let mut open: Option<Open> = None;
    for (g, gap) in gaps.iter().enumerate() {
        let is_target = target == Some(g);
        if !gap.active || (is_target && gap.r_words == 1) {
            open.get_or_insert(Open {
                h: gap.hreg.start,
                r: gap.rreg.start,
                anchors: Vec::new(),
            });
        } else if is_target {
            let sep = r.seg.separators[gap.r_lo];
            let keep_ws = h.chars[gap.hreg.start..gap.hreg.end]
                .iter()
                .zip(&r.chars[sep.start..sep.end])
                .take_while(|(a, b)| a == b)
                .count();
            let o = open.take().unwrap_or(Open {
                h: gap.hreg.start,
                r: gap.rreg.start,
                anchors: Vec::new(),
            });
            let split = gap.hreg.start + keep_ws;
            close(o, split, r.seg.words[gap.r_lo].end, &mut pieces);
            pieces.push(Piece::Blank {
                hyp: CharSpan::new(split, gap.hreg.end),
            });
        } else {
            if let Some(o) = open.take() {
                close(o, gap.hreg.start, gap.rreg.start, &mut pieces);
            }
            pieces.push(Piece::Blank { hyp: gap.hreg });
        }
        if let Some(&(hi, ri)) = pairs.get(g) {
            let hw = h.seg.words[hi];
            open.get_or_insert(Open {
                h: hw.start,
                r: r.seg.words[ri].start,
                anchors: Vec::new(),
            })
            .anchors
            .push(word_anchor(h, hi, r, ri));
        }
    }
    if let Some(o) = open.take() {
        close(o, h.len(), r.len(), &mut pieces);
    }
    pieces
}
