//! Consensus beam search: one infill, with field slots, that scores well
//! for many inputs at once.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lm::{is_reserved, Context, LanguageModel, TokenDistribution, END};
use crate::model::{tokenize, DataInput, TemplateToken};

/// The surroundings of one gap, realized for one input.
#[derive(Clone, Debug, PartialEq)]
pub struct GapContext<'a> {
    pub data: &'a DataInput,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbsResult {
    pub tokens: Vec<TemplateToken>,
    /// Sum of the per-step scores, each a mean over contexts.
    pub total: f64,
    /// `total / steps`, the selection criterion.
    pub mean: f64,
    /// Whether the hypothesis closed the gap with END.
    pub finished: bool,
}

#[derive(Clone)]
struct Hyp {
    tokens: Vec<TemplateToken>,
    /// Realized prefix per context.
    realized: Vec<Vec<String>>,
    total: f64,
    steps: usize,
    finished: bool,
}

impl Hyp {
    fn mean(&self) -> f64 {
        if self.steps == 0 {
            f64::NEG_INFINITY
        } else {
            self.total / self.steps as f64
        }
    }
}

fn token_key(t: &TemplateToken) -> (bool, &str) {
    (!t.is_terminal(), t.text())
}

fn cmp_tokens(a: &[TemplateToken], b: &[TemplateToken]) -> Ordering {
    a.iter().map(token_key).cmp(b.iter().map(token_key))
}

/// Index of the value whose first token scores highest (ties: lowest index),
/// and the joint infill log-probability of that value's tokens.
pub fn greedy_value<M: LanguageModel + ?Sized>(
    backend: &M,
    ctx: &Context<'_>,
    prefix: &[String],
    dist: &TokenDistribution,
    values: &[String],
) -> Result<(usize, f64)> {
    let mut best = 0;
    let mut best_first = f64::NEG_INFINITY;
    for (i, v) in values.iter().enumerate() {
        let first = v.split_whitespace().next().unwrap_or("");
        let lp = dist.logprob(first);
        if i == 0 || lp > best_first {
            best = i;
            best_first = lp;
        }
    }
    let toks = tokenize(&values[best]);
    let mut total = best_first;
    let mut seq = prefix.to_vec();
    seq.push(toks[0].clone());
    for tok in &toks[1..] {
        total += backend.token_logprob(ctx, &seq, tok)?;
        seq.push(tok.clone());
    }
    Ok((best, total))
}

/// Terminal words the search may emit.
fn terminal_vocabulary<M: LanguageModel + ?Sized>(backend: &M, first: &TokenDistribution) -> Vec<String> {
    let mut vocab = backend.vocabulary();
    if vocab.is_empty() {
        vocab = first.words().map(str::to_owned).collect();
    }
    vocab.retain(|w| !is_reserved(w));
    vocab.sort();
    vocab.dedup();
    vocab
}

/// Beam search over words, fields of every context, and END.
///
/// Each step scores a candidate by the mean over contexts of its infill
/// log-probability; a field is scored by the joint log-probability of the
/// value picked for each context by its first token. Hypotheses that emit
/// END are frozen. After `max_len` steps the hypothesis with the highest
/// mean per-step score wins.
pub fn consensus_beam_search<M: LanguageModel + ?Sized>(
    contexts: &[GapContext<'_>],
    backend: &M,
    k: usize,
    max_len: usize,
) -> Result<CbsResult> {
    Ok(consensus_candidates(contexts, backend, k, max_len)?.swap_remove(0))
}

/// Every hypothesis left at the end of the search, best first.
pub fn consensus_candidates<M: LanguageModel + ?Sized>(
    contexts: &[GapContext<'_>],
    backend: &M,
    k: usize,
    max_len: usize,
) -> Result<Vec<CbsResult>> {
    if contexts.is_empty() {
        return Err(Error::InvalidParameter(
            "consensus search needs at least one context".into(),
        ));
    }
    if k == 0 || max_len == 0 {
        return Err(Error::InvalidParameter(
            "beam size and maximum length must be positive".into(),
        ));
    }
    // Fields present in every context; others would have no value to fill.
    let mut fields: BTreeSet<&str> = contexts[0].data.fields().collect();
    for c in &contexts[1..] {
        fields.retain(|f| c.data.has_field(f));
    }
    let n = contexts.len() as f64;
    let ctxs: Vec<Context<'_>> = contexts
        .iter()
        .map(|c| Context::infill(c.data, &c.left, &c.right))
        .collect();

    let mut vocab: Option<Vec<String>> = None;
    let mut alive = vec![Hyp {
        tokens: Vec::new(),
        realized: vec![Vec::new(); contexts.len()],
        total: 0.0,
        steps: 0,
        finished: false,
    }];
    let mut done: Vec<Hyp> = Vec::new();

    for _ in 0..max_len {
        if alive.is_empty() {
            break;
        }
        let mut expansions: Vec<Hyp> = Vec::new();
        for hyp in &alive {
            let dists: Vec<TokenDistribution> = ctxs
                .par_iter()
                .zip(&hyp.realized)
                .map(|(ctx, prefix)| backend.next_token_logprobs(ctx, prefix))
                .collect::<Result<_>>()?;
            let vocab = vocab.get_or_insert_with(|| terminal_vocabulary(backend, &dists[0]));

            // `None` closes the gap.
            let extend = |token: Option<TemplateToken>, step: f64, realized: Vec<Vec<String>>| Hyp {
                finished: token.is_none(),
                tokens: hyp.tokens.iter().cloned().chain(token).collect(),
                realized,
                total: hyp.total + step,
                steps: hyp.steps + 1,
            };

            let end: f64 = dists.iter().map(|d| d.logprob(END)).sum::<f64>() / n;
            if end > f64::NEG_INFINITY {
                expansions.push(extend(None, end, hyp.realized.clone()));
            }
            for w in vocab.iter() {
                let step = dists.iter().map(|d| d.logprob(w)).sum::<f64>() / n;
                if step == f64::NEG_INFINITY {
                    continue;
                }
                let realized = hyp
                    .realized
                    .iter()
                    .map(|r| {
                        let mut r = r.clone();
                        r.push(w.clone());
                        r
                    })
                    .collect();
                expansions.push(extend(Some(TemplateToken::terminal(w.clone())), step, realized));
            }
            for field in &fields {
                let picked: Vec<(usize, f64)> = ctxs
                    .par_iter()
                    .zip(contexts)
                    .zip(&hyp.realized)
                    .zip(&dists)
                    .map(|(((ctx, c), prefix), dist)| {
                        let values = c.data.values(field).expect("field present in every context");
                        greedy_value(backend, ctx, prefix, dist, values)
                    })
                    .collect::<Result<_>>()?;
                let step = picked.iter().map(|(_, lp)| lp).sum::<f64>() / n;
                if step == f64::NEG_INFINITY {
                    continue;
                }
                let realized = hyp
                    .realized
                    .iter()
                    .zip(contexts)
                    .zip(&picked)
                    .map(|((r, c), (vi, _))| {
                        let mut r = r.clone();
                        r.extend(tokenize(&c.data.values(field).unwrap()[*vi]));
                        r
                    })
                    .collect();
                expansions.push(extend(Some(TemplateToken::field(*field)), step, realized));
            }
        }
        // Within one step all hypotheses have the same number of steps, so
        // totals rank like means.
        expansions.sort_by(|a, b| {
            b.total
                .total_cmp(&a.total)
                .then(a.finished.cmp(&b.finished).reverse())
                .then_with(|| cmp_tokens(&a.tokens, &b.tokens))
        });
        expansions.truncate(k);
        alive.clear();
        for h in expansions {
            if h.finished {
                done.push(h);
            } else {
                alive.push(h);
            }
        }
    }

    let mut all: Vec<Hyp> = done.into_iter().chain(alive).collect();
    all.sort_by(|a, b| {
        b.mean()
            .total_cmp(&a.mean())
            .then(a.tokens.len().cmp(&b.tokens.len()))
            .then_with(|| cmp_tokens(&a.tokens, &b.tokens))
    });
    if all.is_empty() {
        return Err(Error::InvalidParameter("consensus search found no hypothesis".into()));
    }
    Ok(all
        .into_iter()
        .map(|h| CbsResult {
            mean: h.mean(),
            tokens: h.tokens,
            total: h.total,
            finished: h.finished,
        })
        .collect())
}
