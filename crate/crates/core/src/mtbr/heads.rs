//! Stateless pieces of the model: boundary pairing, span averaging, the
//! 4-to-7 probability transformation, the revision and the gated selection.

use rand::distributions::Open01;
use rand::Rng;

use crate::corpus::{NerLabel, SpanTag};
use crate::diff::ops::{argmax, renormalize};
use crate::diff::Matrix;

/// Inclusive token bounds of a detected span.
pub type Span = (usize, usize);

/// Slots of the 7-way vector that receive `[PER, LOC, ORG, O]` for the first
/// token of a span.
pub const FIRST_TOKEN_SLOTS: [usize; 4] = [
    NerLabel::BPer as usize,
    NerLabel::BLoc as usize,
    NerLabel::BOrg as usize,
    NerLabel::O as usize,
];

/// Slots for every later token of a span.
pub const INNER_TOKEN_SLOTS: [usize; 4] = [
    NerLabel::IPer as usize,
    NerLabel::ILoc as usize,
    NerLabel::IOrg as usize,
    NerLabel::O as usize,
];

/// Greedy left-to-right pairing: each start `i` takes the nearest end
/// `j >= i` that comes before the next start. Starts without such an end,
/// and ends never claimed, are dropped.
pub fn pair_boundaries(starts: &[bool], ends: &[bool]) -> Vec<Span> {
    debug_assert_eq!(starts.len(), ends.len());
    let start_idx: Vec<usize> = (0..starts.len()).filter(|&i| starts[i]).collect();
    let mut spans = Vec::new();
    for (k, &i) in start_idx.iter().enumerate() {
        let limit = start_idx.get(k + 1).copied().unwrap_or(starts.len());
        if let Some(j) = (i..limit).find(|&j| ends[j]) {
            spans.push((i, j));
        }
    }
    spans
}

/// Pairs the per-token argmax decisions of the two boundary classifiers
/// (class 1 = boundary).
pub fn pair_from_probs(p_start: &Matrix, p_end: &Matrix) -> Vec<Span> {
    let starts: Vec<bool> = p_start.iter_rows().map(|r| argmax(r) == 1).collect();
    let ends: Vec<bool> = p_end.iter_rows().map(|r| argmax(r) == 1).collect();
    pair_boundaries(&starts, &ends)
}

/// Mean of the boundary-task representations over the span, and the mean
/// of the gold one-hot span tags (a soft target).
pub fn span_represent(span: Span, h_bd: &Matrix, gold: &[SpanTag]) -> (Vec<f64>, [f64; 4]) {
    let (i, j) = span;
    let n = (j - i + 1) as f64;
    let mut v = vec![0.0; h_bd.cols()];
    let mut y = [0.0; 4];
    for t in i..=j {
        for (acc, x) in v.iter_mut().zip(h_bd.row(t)) {
            *acc += x;
        }
        if let Some(tag) = gold.get(t) {
            y[tag.index()] += 1.0;
        }
    }
    v.iter_mut().for_each(|x| *x /= n);
    y.iter_mut().for_each(|x| *x /= n);
    (v, y)
}

/// Spreads each span's 4-way distribution over the 7 BIO2 slots: B-slots on
/// the span's first token, I-slots on the rest, `O` on both. Tokens outside
/// every span get an all-zero row.
pub fn transform_span_probs(spans: &[Span], p_sp: &[[f64; 4]], len: usize) -> Matrix {
    let mut out = Matrix::zeros(len, NerLabel::COUNT);
    for (&(i, j), probs) in spans.iter().zip(p_sp) {
        for t in i..=j {
            let slots = if t == i { &FIRST_TOKEN_SLOTS } else { &INNER_TOKEN_SLOTS };
            let row = out.row_mut(t);
            for (&slot, &p) in slots.iter().zip(probs) {
                row[slot] = p;
            }
        }
    }
    out
}

/// `p_ner[i] + gate[i] * p_new_sp[i]`, row by row.
pub fn bi_revise(p_ner: &Matrix, gate: &[f64], p_new_sp: &Matrix) -> Matrix {
    let mut out = p_ner.clone();
    for (t, &g) in gate.iter().enumerate() {
        for (o, &s) in out.row_mut(t).iter_mut().zip(p_new_sp.row(t)) {
            *o += g * s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Draws the per-sentence uniform `p ∈ (0, 1)` and returns whether the
/// revised distribution is used (`p <= alpha`).
pub fn draw_revision<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> bool {
    let p: f64 = rng.sample(Open01);
    p <= alpha
}

/// Chooses between the plain and the revised distribution and renormalizes
/// each row. In inference the revised distribution is always used.
pub fn gated_select<R: Rng + ?Sized>(
    p_ner: &Matrix,
    p_ner_rev: &Matrix,
    alpha: f64,
    mode: Mode,
    rng: &mut R,
) -> (Matrix, bool) {
    let revised = match mode {
        Mode::Infer => true,
        Mode::Train => draw_revision(alpha, rng),
    };
    let chosen = if revised { p_ner_rev } else { p_ner };
    (renormalize_rows(chosen), revised)
}

pub fn renormalize_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for t in 0..m.rows() {
        let row = renormalize(m.row(t)).expect("probability rows have positive mass");
        out.row_mut(t).copy_from_slice(&row);
    }
    out
}

/// `w1 * (start + end) + (1 - w1) * span`.
pub fn combine_bd_loss(start: f64, end: f64, span: f64, w1: f64) -> f64 {
    w1 * (start + end) + (1.0 - w1) * span
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flags(n: usize, on: &[usize]) -> Vec<bool> {
        (0..n).map(|i| on.contains(&i)).collect()
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(pair_boundaries(&flags(5, &[1]), &flags(5, &[3])), [(1, 3)]);
        assert_eq!(
            pair_boundaries(&flags(6, &[1, 4]), &flags(6, &[2, 5])),
            [(1, 2), (4, 5)]
        );
        assert!(pair_boundaries(&flags(4, &[2]), &flags(4, &[])).is_empty());
        // start 0 has no end before start 2; start 2 takes the end at 3
        assert_eq!(pair_boundaries(&flags(4, &[0, 2]), &flags(4, &[3])), [(2, 3)]);
        // a token can both start and end
        assert_eq!(pair_boundaries(&flags(3, &[1]), &flags(3, &[1, 2])), [(1, 1)]);
    }

    #[test]
    fn span_represent_examples() {
        let h = Matrix::from_rows(&[vec![1.0, 3.0], vec![3.0, 5.0]]);
        let (v, y) = span_represent((0, 1), &h, &[SpanTag::Per, SpanTag::Per]);
        assert_eq!(v, [2.0, 4.0]);
        assert_eq!(y, [1.0, 0.0, 0.0, 0.0]);
        let (_, y) = span_represent((0, 1), &h, &[SpanTag::Per, SpanTag::O]);
        assert_eq!(y, [0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn transform_examples() {
        let p = [0.7, 0.1, 0.1, 0.1];
        let m = transform_span_probs(&[(1, 2)], &[p], 4);
        assert_eq!(m.row(0), [0.0; 7]);
        assert_eq!(m.row(1), [0.7, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1]);
        assert_eq!(m.row(2), [0.0, 0.7, 0.0, 0.1, 0.0, 0.1, 0.1]);
        assert_eq!(m.row(3), [0.0; 7]);
    }

    #[test]
    fn revise_example() {
        let p_ner = Matrix::from_rows(&[vec![0.5, 0.1, 0.1, 0.1, 0.1, 0.05, 0.05]]);
        let p_new = Matrix::from_rows(&[vec![0.7, 0.0, 0.1, 0.0, 0.1, 0.0, 0.1]]);
        let r = bi_revise(&p_ner, &[0.2], &p_new);
        let expected = [0.64, 0.1, 0.12, 0.1, 0.12, 0.05, 0.07];
        for (a, b) in r.row(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        let zero = Matrix::zeros(1, 7);
        assert_eq!(bi_revise(&p_ner, &[0.9], &zero), p_ner);
        assert_eq!(bi_revise(&p_ner, &[0.0], &p_new), p_ner);
    }

    #[test]
    fn selection_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!(!draw_revision(0.0, &mut rng));
            assert!(draw_revision(1.0, &mut rng));
        }
    }

    #[test]
    fn selection_branch_for_a_fixed_draw() {
        // find a seed whose first Open01 draw is above 0.5, as the p > α branch
        let seed = (0..)
            .find(|&s| ChaCha8Rng::seed_from_u64(s).sample::<f64, _>(Open01) > 0.5)
            .unwrap();
        let p_ner = Matrix::from_rows(&[vec![0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6]]);
        let rev = Matrix::from_rows(&[vec![1.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.6]]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (out, revised) = gated_select(&p_ner, &rev, 0.5, Mode::Train, &mut rng);
        assert!(!revised);
        assert_eq!(out, p_ner);
        let (out, revised) = gated_select(&p_ner, &rev, 0.5, Mode::Infer, &mut rng);
        assert!(revised);
        assert!((out[(0, 0)] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn loss_combination() {
        // L_bd = L_s + L_e = 1.0
        assert_eq!(combine_bd_loss(0.4, 0.6, 2.0, 0.5), 1.5);
        assert_eq!(combine_bd_loss(0.4, 0.6, 123.0, 1.0), 1.0);
    }
}
