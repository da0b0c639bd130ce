//! BLEU with brevity penalty and add-epsilon smoothing.

use std::collections::HashMap;

use crate::error::{CasaError, Result};

pub const MAX_ORDER: usize = 4;
/// Stand-in for a zero clipped match count.
pub const EPSILON: f64 = 1e-9;

/// Splits on whitespace after detaching common punctuation from words.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        if matches!(c, '.' | ',' | '!' | '?' | ';' | ':' | '"' | '(' | ')') {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Stats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    cand_len: usize,
    ref_len: usize,
}

fn stats(candidate: &[String], reference: &[String]) -> Stats {
    let mut s = Stats { cand_len: candidate.len(), ref_len: reference.len(), ..Default::default() };
    for n in 1..=MAX_ORDER {
        let cand = ngrams(candidate, n);
        let refs = ngrams(reference, n);
        s.totals[n - 1] = cand.values().sum();
        s.matches[n - 1] = cand.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

fn score(s: &Stats) -> f64 {
    if s.cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0;
    for n in 0..MAX_ORDER {
        if s.totals[n] == 0 {
            continue;
        }
        let m = if s.matches[n] == 0 { EPSILON } else { s.matches[n] as f64 };
        log_sum += (m / s.totals[n] as f64).ln();
        orders += 1;
    }
    let bp = if s.cand_len >= s.ref_len { 1.0 } else { (1.0 - s.ref_len as f64 / s.cand_len as f64).exp() };
    bp * (log_sum / orders as f64).exp()
}

/// Corpus-level BLEU: n-gram statistics and lengths are summed over all pairs
/// before the precisions are combined. Orders longer than every candidate are
/// left out of the geometric mean.
pub fn corpus_bleu(candidates: &[&str], references: &[&str]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(CasaError::LengthMismatch(candidates.len(), references.len()));
    }
    let mut total = Stats::default();
    for (c, r) in candidates.iter().zip(references) {
        let r = tokenize(r);
        if r.is_empty() {
            return Err(CasaError::EmptyReference);
        }
        let s = stats(&tokenize(c), &r);
        for n in 0..MAX_ORDER {
            total.matches[n] += s.matches[n];
            total.totals[n] += s.totals[n];
        }
        total.cand_len += s.cand_len;
        total.ref_len += s.ref_len;
    }
    if candidates.is_empty() {
        return Err(CasaError::EmptyReference);
    }
    Ok(score(&total))
}

pub fn bleu(candidate: &str, reference: &str) -> Result<f64> {
    corpus_bleu(&[candidate], &[reference])
}

/// Mean of per-pair sentence BLEU scores.
pub fn mean_sentence_bleu(candidates: &[&str], references: &[&str]) -> Result<f64> {
    if candidates.len() != references.len() {
        return Err(CasaError::LengthMismatch(candidates.len(), references.len()));
    }
    if candidates.is_empty() {
        return Err(CasaError::EmptyReference);
    }
    let scores = candidates.iter().zip(references).map(|(c, r)| bleu(c, r)).collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
