//! Classification metrics and the paired permutation test.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CasaError, Result};
use crate::types::Label;

fn check(preds: &[Label], golds: &[Label]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(CasaError::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(CasaError::EmptyInput);
    }
    Ok(())
}

pub fn accuracy(preds: &[Label], golds: &[Label]) -> Result<f64> {
    check(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

fn f1(preds: &[Label], golds: &[Label], class: Label) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&p, &g) in preds.iter().zip(golds) {
        match (p == class, g == class) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fne) as f64
}

/// Unweighted mean of the two per-class F1 scores. A class that never occurs
/// in either list scores 0.
pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<f64> {
    check(preds, golds)?;
    Ok((f1(preds, golds, Label::Sufficient) + f1(preds, golds, Label::Insufficient)) / 2.0)
}

/// Per-item difference in correctness, a minus b.
fn diffs(preds_a: &[Label], preds_b: &[Label], golds: &[Label]) -> Result<Vec<i64>> {
    check(preds_a, golds)?;
    check(preds_b, golds)?;
    Ok(preds_a
        .iter()
        .zip(preds_b)
        .zip(golds)
        .map(|((a, b), g)| i64::from(a == g) - i64::from(b == g))
        .collect())
}

/// Two-sided Monte Carlo p-value for the accuracy difference of two systems
/// evaluated on the same items. Each resample swaps every pair of predictions
/// with probability one half. Returns `(count + 1) / (resamples + 1)`.
pub fn paired_permutation_test(
    preds_a: &[Label],
    preds_b: &[Label],
    golds: &[Label],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    let d = diffs(preds_a, preds_b, golds)?;
    let observed: i64 = d.iter().sum::<i64>().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    for _ in 0..resamples {
        let stat: i64 = d.iter().map(|&x| if rng.random::<bool>() { -x } else { x }).sum();
        if stat.abs() >= observed {
            count += 1;
        }
    }
    Ok((count + 1) as f64 / (resamples + 1) as f64)
}

/// Exact p-value over all `2^k` swap patterns of the `k` disagreeing items.
/// Practical for `k` up to about 25.
pub fn paired_permutation_exact(preds_a: &[Label], preds_b: &[Label], golds: &[Label]) -> Result<f64> {
    let d: Vec<i64> = diffs(preds_a, preds_b, golds)?.into_iter().filter(|&x| x != 0).collect();
    if d.len() > 25 {
        return Err(CasaError::InvalidInput(format!("{} discordant pairs is too many to enumerate", d.len())));
    }
    let observed: i64 = d.iter().sum::<i64>().abs();
    let total = 1u64 << d.len();
    let extreme = (0..total)
        .filter(|mask| {
            let stat: i64 = d.iter().enumerate().map(|(i, &x)| if mask >> i & 1 == 1 { -x } else { x }).sum();
            stat.abs() >= observed
        })
        .count();
    Ok(extreme as f64 / total as f64)
}
