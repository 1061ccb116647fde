//! Evaluation metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::tasks::dep::DepArc;

fn check_pair<T>(gold: &[T], pred: &[T]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::shape(format!("{} gold items, {} predictions", gold.len(), pred.len())));
    }
    if gold.is_empty() {
        return Err(Error::input("no items to score"));
    }
    Ok(())
}

pub fn accuracy<T: PartialEq>(gold: &[T], pred: &[T]) -> Result<f64> {
    check_pair(gold, pred)?;
    let hits = gold.iter().zip(pred).filter(|(g, p)| g == p).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Unweighted mean of per-class F1 over the classes seen in gold or pred.
pub fn f1_macro<T: Ord>(gold: &[T], pred: &[T]) -> Result<f64> {
    check_pair(gold, pred)?;
    let classes: BTreeSet<&T> = gold.iter().chain(pred).collect();
    let mut sum = 0.0;
    for c in &classes {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (g, p) in gold.iter().zip(pred) {
            match (g == *c, p == *c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                _ => {}
            }
        }
        // 2PR / (P + R) reduces to 2tp / (2tp + fp + fn)
        let denom = 2 * tp + fp + fn_;
        if denom > 0 && tp > 0 {
            sum += 2.0 * tp as f64 / denom as f64;
        }
    }
    Ok(sum / classes.len() as f64)
}

/// `(LAS, UAS)` over all words of all sentences.
pub fn las_uas(gold: &[Vec<DepArc>], pred: &[Vec<DepArc>]) -> Result<(f64, f64)> {
    if gold.len() != pred.len() {
        return Err(Error::shape(format!("{} gold sentences, {} predicted", gold.len(), pred.len())));
    }
    let mut words = 0usize;
    let mut heads = 0usize;
    let mut both = 0usize;
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::shape(format!("sentence of {} words scored against {}", g.len(), p.len())));
        }
        for (a, b) in g.iter().zip(p) {
            words += 1;
            if a.head == b.head {
                heads += 1;
                if a.label == b.label {
                    both += 1;
                }
            }
        }
    }
    if words == 0 {
        return Err(Error::input("no words to score"));
    }
    Ok((both as f64 / words as f64, heads as f64 / words as f64))
}

/// Word-level Levenshtein distance.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn word_error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::input("empty reference"));
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}
