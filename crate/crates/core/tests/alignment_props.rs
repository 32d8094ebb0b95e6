use imteval_core::alignment::{
    char_script, levenshtein, mark_correct, merge_spans, mtpe_batch, mtpe_cost, Aligner, StepKind,
};
use imteval_core::edit::EditKind;
use proptest::prelude::*;

/// Plain recursion over the three edit moves.
fn lev_naive(a: &[char], b: &[char]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            let sub = lev_naive(ra, rb) + usize::from(x != y);
            sub.min(lev_naive(ra, b) + 1).min(lev_naive(a, rb) + 1)
        }
    }
}

/// Cheapest span decomposition: kept characters are free, every edited
/// region `h[i..i2] -> r[j..j2]` costs as one insert, delete or replace.
fn span_cost_brute(h: &[char], r: &[char]) -> u64 {
    let (n, m) = (h.len(), r.len());
    let mut best = vec![vec![u64::MAX; m + 1]; n + 1];
    best[n][m] = 0;
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            if (i, j) == (n, m) {
                continue;
            }
            let mut v = u64::MAX;
            if i < n && j < m && h[i] == r[j] {
                v = best[i + 1][j + 1];
            }
            for i2 in i..=n {
                for j2 in j..=m {
                    if (i2, j2) == (i, j) || best[i2][j2] == u64::MAX {
                        continue;
                    }
                    let ins = (j2 - j) as u64;
                    let c = match (i2 > i, j2 > j) {
                        (false, _) => ins,
                        (true, false) => 1,
                        (true, true) => ins + 1,
                    };
                    v = v.min(c + best[i2][j2]);
                }
            }
            best[i][j] = v;
        }
    }
    best[0][0]
}

fn small() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'b', 'c', ' ']), 0..9)
        .prop_map(|v| v.into_iter().collect())
}

fn unicode() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop::sample::select(vec!['a', 'ä', '猫', ' ', 'z', '→']), 0..24)
        .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn levenshtein_matches_recursion(a in small(), b in small()) {
        let (x, y): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert_eq!(levenshtein(&x, &y), lev_naive(&x, &y));
    }

    #[test]
    fn script_replays_to_reference(a in unicode(), b in unicode()) {
        let s = char_script(&a, &b);
        prop_assert_eq!(s.apply(&a), b.clone());
        let (x, y): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        prop_assert_eq!(s.distance(), levenshtein(&x, &y));
    }

    #[test]
    fn merged_spans_bound_the_brute_force_optimum(a in small(), b in small()) {
        let (x, y): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let merged = merge_spans(&char_script(&a, &b));
        prop_assert!(merged.cost() >= span_cost_brute(&x, &y));
    }

    #[test]
    fn fast_path_agrees_with_merged_script(a in unicode(), b in unicode()) {
        let merged = merge_spans(&char_script(&a, &b));
        let (x, y): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
        let fast = Aligner::new().mtpe_cost(&x, &y);
        prop_assert_eq!(fast.cost, merged.cost());
        prop_assert_eq!(fast.span_count, merged.span_count());
        prop_assert_eq!(mtpe_cost(&a, &b), fast);
    }

    #[test]
    fn mtpe_batch_applies_and_never_keeps(a in unicode(), b in unicode()) {
        let batch = mtpe_batch(&a, &b);
        prop_assert!(batch.validate().is_ok());
        prop_assert_eq!(batch.apply().unwrap(), b.clone());
        prop_assert!(batch.ops.iter().all(|op| op.kind != EditKind::Keep && op.kind != EditKind::BlankFill));
        prop_assert_eq!(batch.cost(), mtpe_cost(&a, &b).cost);
    }

    #[test]
    fn correctness_marking_is_an_lcs(
        h in proptest::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..8),
        r in proptest::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..8),
    ) {
        let m = mark_correct(&h, &r);
        let pairs = m.pairs();
        for w in pairs.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &pairs {
            prop_assert_eq!(h[i], r[j]);
        }
        let lcs = {
            let mut t = vec![vec![0usize; r.len() + 1]; h.len() + 1];
            for i in (0..h.len()).rev() {
                for j in (0..r.len()).rev() {
                    t[i][j] = if h[i] == r[j] { t[i + 1][j + 1] + 1 } else { t[i + 1][j].max(t[i][j + 1]) };
                }
            }
            t[0][0]
        };
        prop_assert_eq!(pairs.len(), lcs);
        prop_assert_eq!(m.correct_count(), lcs);
    }
}

#[test]
fn substitution_runs_are_single_replacements() {
    let s = char_script("the dog sat", "the cat sat");
    assert!(s.steps.iter().any(|st| matches!(st.kind, StepKind::Substitute(_))));
    let spans = merge_spans(&s);
    assert_eq!(spans.span_count(), 1);
    assert_eq!(spans.cost(), 4);
    assert_eq!(mtpe_cost("the cat", "the cat sat").cost, 4);
    assert_eq!(mtpe_cost("", "").span_count, 0);
}

#[test]
fn brute_force_oracle_sanity() {
    let c = |a: &str, b: &str| span_cost_brute(&a.chars().collect::<Vec<_>>(), &b.chars().collect::<Vec<_>>());
    assert_eq!(c("abc", "abc"), 0);
    assert_eq!(c("", "abc"), 3);
    assert_eq!(c("abc", ""), 1);
    assert_eq!(c("axc", "abc"), 2);
    assert_eq!(c("ab", "ba"), 2);
}
