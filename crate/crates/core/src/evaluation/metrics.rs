//! Reference-based metrics: corpus BLEU-4 and ROUGE-L, both on a 0-100
//! scale over whitespace tokens.

use std::collections::HashMap;

use crate::error::{Error, Result};

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

fn check_lengths(candidates: usize, references: usize) -> Result<()> {
    if candidates != references {
        return Err(Error::InvalidParameter(format!(
            "{candidates} candidates but {references} reference sets"
        )));
    }
    Ok(())
}

/// Corpus BLEU-4 with uniform weights and the brevity penalty, without
/// smoothing. Each candidate may have several references; clipping uses
/// the maximum count over references and the effective reference length is
/// the closest one (shorter on ties).
pub fn bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    check_lengths(candidates.len(), references.len())?;
    let mut matched = [0usize; 4];
    let mut possible = [0usize; 4];
    let mut cand_len = 0;
    let mut ref_len = 0;
    for (cand, refs) in candidates.iter().zip(references) {
        if refs.is_empty() {
            return Err(Error::InvalidParameter("candidate without reference".into()));
        }
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(Vec::len)
            .min_by_key(|&r| (r.abs_diff(cand.len()), r))
            .unwrap();
        for n in 1..=4 {
            let counts = ngrams(cand, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in refs {
                for (g, c) in ngrams(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            matched[n - 1] += counts
                .iter()
                .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
            possible[n - 1] += cand.len().saturating_sub(n - 1);
        }
    }
    if matched.iter().any(|&m| m == 0) {
        return Ok(0.0);
    }
    let log_precision: f64 = (0..4)
        .map(|i| (matched[i] as f64 / possible[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Weight of recall relative to precision in the F-measure.
pub const ROUGE_BETA: f64 = 1.2;

/// Sentence ROUGE-L F-measure. With several references, the best precision
/// and the best recall are combined.
pub fn rouge_l_sentence(candidate: &[String], references: &[Vec<String>]) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    let (mut p, mut r) = (0.0f64, 0.0f64);
    for reference in references.iter().filter(|r| !r.is_empty()) {
        let l = lcs(candidate, reference) as f64;
        p = p.max(l / candidate.len() as f64);
        r = r.max(l / reference.len() as f64);
    }
    if p == 0.0 || r == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean sentence ROUGE-L over the corpus.
pub fn rouge_l(candidates: &[Vec<String>], references: &[Vec<Vec<String>>]) -> Result<f64> {
    check_lengths(candidates.len(), references.len())?;
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| rouge_l_sentence(c, r))
        .sum();
    Ok(100.0 * sum / candidates.len() as f64)
}
