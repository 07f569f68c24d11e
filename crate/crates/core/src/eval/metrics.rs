use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::corpus::{EntitySpan, EntityType, NerLabel};

/// Counts and ratios for one slice of the evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Scores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Scores {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Micro-averaged exact-match scores with a per-type breakdown.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    #[serde(flatten)]
    pub micro: Scores,
    pub per_type: BTreeMap<EntityType, Scores>,
}

/// Matches predictions to identical gold spans in the same sentence, each
/// gold span at most once.
pub fn entity_prf(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> Prf {
    assert_eq!(gold.len(), pred.len(), "gold and predictions cover different sentence counts");
    let mut counts: BTreeMap<EntityType, (usize, usize, usize)> =
        EntityType::ALL.iter().map(|&t| (t, (0, 0, 0))).collect();
    for (g, p) in gold.iter().zip(pred) {
        let mut used = vec![false; g.len()];
        for span in p {
            let hit = g
                .iter()
                .enumerate()
                .position(|(k, gs)| !used[k] && gs == span);
            let c = counts.get_mut(&span.etype).expect("all types present");
            match hit {
                Some(k) => {
                    used[k] = true;
                    c.0 += 1;
                }
                None => c.1 += 1,
            }
        }
        for (gs, u) in g.iter().zip(&used) {
            if !u {
                counts.get_mut(&gs.etype).expect("all types present").2 += 1;
            }
        }
    }
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Prf {
        micro: Scores::from_counts(tp, fp, fn_),
        per_type: counts
            .into_iter()
            .map(|(t, (tp, fp, fn_))| (t, Scores::from_counts(tp, fp, fn_)))
            .collect(),
    }
}

/// Fraction of gold tags reproduced exactly, over all tokens.
pub fn token_accuracy(gold: &[Vec<NerLabel>], pred: &[Vec<NerLabel>]) -> f64 {
    let mut total = 0usize;
    let mut right = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        total += g.len();
        right += g.iter().zip(p).filter(|(a, b)| a == b).count();
    }
    if total == 0 {
        0.0
    } else {
        right as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BreReport {
    pub predicted_count: usize,
    pub boundary_error_count: usize,
    pub bre_ratio: f64,
}

/// A predicted span is a boundary error when it shares a token with a gold
/// span of the same type but has different bounds. The ratio is over all
/// predicted spans.
pub fn bre_ratio(gold: &[Vec<EntitySpan>], pred: &[Vec<EntitySpan>]) -> BreReport {
    assert_eq!(gold.len(), pred.len(), "gold and predictions cover different sentence counts");
    let mut predicted = 0;
    let mut errors = 0;
    for (g, p) in gold.iter().zip(pred) {
        predicted += p.len();
        errors += p
            .iter()
            .filter(|s| {
                g.iter()
                    .any(|gs| gs.etype == s.etype && gs.overlaps(s) && (gs.start, gs.end) != (s.start, s.end))
            })
            .count();
    }
    BreReport {
        predicted_count: predicted,
        boundary_error_count: errors,
        bre_ratio: if predicted == 0 {
            0.0
        } else {
            errors as f64 / predicted as f64
        },
    }
}
