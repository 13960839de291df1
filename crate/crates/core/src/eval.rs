//! Exact-match span precision, recall and F-score.
//!
//! A predicted segment is correct when start, end and label all match a
//! gold segment. In span-labeled corpora `NONE` segments are ignored on both
//! sides; in word segmentation every word counts.

use alloc::collections::BTreeSet;
use alloc::format;

use crate::segment::{LabeledCorpus, TaskKind};
use crate::{Error, Result, Segment, Segmentation};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            correct,
            predicted,
            gold,
            precision,
            recall,
            f1,
        }
    }
}

/// Counts `(correct, predicted, gold)` for one sequence, skipping `ignore`.
pub fn span_counts(gold: &Segmentation, pred: &Segmentation, ignore: Option<usize>) -> (usize, usize, usize) {
    let counted = |s: &&Segment| Some(s.label) != ignore;
    let gold_set: BTreeSet<Segment> = gold.iter().filter(counted).copied().collect();
    let mut predicted = 0;
    let mut correct = 0;
    for s in pred.iter().filter(counted) {
        predicted += 1;
        if gold_set.contains(s) {
            correct += 1;
        }
    }
    (correct, predicted, gold_set.len())
}

/// Corpus-level (micro-averaged) scores.
pub fn f_score(gold: &LabeledCorpus, pred: &[Segmentation]) -> Result<Prf> {
    if gold.len() != pred.len() {
        return Err(Error::Validation(format!(
            "{} gold sequences but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let ignore = match gold.task {
        TaskKind::SpanLabeled => gold.labels.none_id(),
        TaskKind::WordSeg => None,
    };
    let (mut c, mut p, mut g) = (0, 0, 0);
    for (i, (ex, pr)) in gold.sequences.iter().zip(pred).enumerate() {
        let n = ex.tokens.len();
        if pr.covered() != n || ex.gold.covered() != n {
            return Err(Error::Validation(format!(
                "sequence {i}: prediction covers {} of {n} tokens",
                pr.covered()
            )));
        }
        let (dc, dp, dg) = span_counts(&ex.gold, pr, ignore);
        c += dc;
        p += dp;
        g += dg;
    }
    Ok(Prf::from_counts(c, p, g))
}
