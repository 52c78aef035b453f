//! The language-model contract used by every scoring and search step.
//!
//! A backend exposes conditional next-token log-probabilities for an input
//! `d`, either left-to-right or in infill mode (a gap between a fixed left
//! and right context). Sequence scoring and beam generation have default
//! implementations in terms of the next-token distribution.

mod beam;
pub mod ngram;
pub mod remote;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::DataInput;

pub use beam::beam_search;
pub use ngram::{NGramConfig, NGramModel};
pub use remote::RemoteModel;

/// End of sequence (or, in infill mode, end of the gap).
pub const END: &str = "__end__";
/// Any token the backend has not seen.
pub const UNK: &str = "__unk__";
/// Aggregate mass of tokens a remote backend did not list.
pub const REST: &str = "__rest__";
/// Separator between fields in the linearized input.
pub const SEP: &str = "[SEP]";

/// True for the reserved pseudo-tokens that can never appear in text.
pub fn is_reserved(token: &str) -> bool {
    matches!(token, END | UNK | REST)
}

/// Flat token form of `d`: `field : v1 | v2 [SEP] field : v ...`, fields
/// sorted alphabetically.
pub fn linearize(d: &DataInput) -> Vec<String> {
    let mut out = Vec::new();
    for (i, (field, values)) in d.entries().iter().enumerate() {
        if i > 0 {
            out.push(SEP.to_owned());
        }
        out.extend(field.split_whitespace().map(str::to_owned));
        out.push(":".to_owned());
        for (j, v) in values.iter().enumerate() {
            if j > 0 {
                out.push("|".to_owned());
            }
            out.extend(v.split_whitespace().map(str::to_owned));
        }
    }
    out
}

/// Conditioning mode of a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode<'a> {
    LeftToRight,
    /// Predict the content of a gap between `left` and `right`.
    Infill {
        left: &'a [String],
        right: &'a [String],
    },
}

/// What a query conditions on.
#[derive(Clone, Copy, Debug)]
pub struct Context<'a> {
    pub data: &'a DataInput,
    pub mode: Mode<'a>,
}

impl<'a> Context<'a> {
    pub fn ltr(data: &'a DataInput) -> Self {
        Context {
            data,
            mode: Mode::LeftToRight,
        }
    }

    pub fn infill(data: &'a DataInput, left: &'a [String], right: &'a [String]) -> Self {
        Context {
            data,
            mode: Mode::Infill { left, right },
        }
    }
}

/// Next-token log-probabilities. Tokens without an entry receive the
/// fallback log-probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDistribution {
    entries: BTreeMap<String, f64>,
    fallback: f64,
}

impl TokenDistribution {
    pub fn new(entries: BTreeMap<String, f64>, fallback: f64) -> Self {
        TokenDistribution { entries, fallback }
    }

    /// Builds a distribution from unnormalized log-scores.
    pub fn from_log_scores(scores: BTreeMap<String, f64>, fallback_key: &str) -> Self {
        let norm = log_sum_exp(scores.values().copied());
        let entries: BTreeMap<String, f64> = scores.into_iter().map(|(k, v)| (k, v - norm)).collect();
        let fallback = entries.get(fallback_key).copied().unwrap_or(f64::NEG_INFINITY);
        TokenDistribution { entries, fallback }
    }

    pub fn logprob(&self, token: &str) -> f64 {
        self.entries.get(token).copied().unwrap_or(self.fallback)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Listed tokens that can appear in text.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str).filter(|t| !is_reserved(t))
    }

    /// Sum of the listed probabilities; 1 for a normalized distribution.
    pub fn total_mass(&self) -> f64 {
        self.entries.values().map(|lp| lp.exp()).sum()
    }

    /// Highest-probability listed word (ties: lexicographically first).
    pub fn argmax_word(&self) -> Option<(&str, f64)> {
        self.words()
            .map(|w| (w, self.entries[w]))
            .fold(None, |best, cur| match best {
                Some((_, b)) if b >= cur.1 => best,
                _ => Some(cur),
            })
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// A conditional language model `p(x | d)` with an infilling variant.
///
/// Implementations are read-only after construction and shareable across
/// threads.
pub trait LanguageModel: Send + Sync {
    /// Words the backend can emit, excluding reserved tokens.
    fn vocabulary(&self) -> Vec<String>;

    fn next_token_logprobs(&self, ctx: &Context<'_>, prefix: &[String]) -> Result<TokenDistribution>;

    fn token_logprob(&self, ctx: &Context<'_>, prefix: &[String], token: &str) -> Result<f64> {
        Ok(self.next_token_logprobs(ctx, prefix)?.logprob(token))
    }

    /// Log-probabilities of several candidate next tokens after one prefix.
    fn candidate_logprobs(&self, ctx: &Context<'_>, prefix: &[String], candidates: &[&str]) -> Result<Vec<f64>> {
        let dist = self.next_token_logprobs(ctx, prefix)?;
        Ok(candidates.iter().map(|c| dist.logprob(c)).collect())
    }

    /// Chain-rule log-probability of each token given its prefix (no END term).
    fn token_logprobs(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<Vec<f64>> {
        (0..tokens.len())
            .map(|j| self.token_logprob(ctx, &tokens[..j], &tokens[j]))
            .collect()
    }

    /// `sum_j log P(x_j | x_<j) + log P(END | x)`.
    fn sequence_logprob(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::InvalidParameter("cannot score an empty sequence".into()));
        }
        let body: f64 = self.token_logprobs(ctx, tokens)?.iter().sum();
        Ok(body + self.token_logprob(ctx, tokens, END)?)
    }

    /// Beam search with beam size `k` and at most `max_len` steps.
    fn beam_generate(&self, ctx: &Context<'_>, k: usize, max_len: usize) -> Result<Vec<String>> {
        Ok(beam_search(self, ctx, k, max_len)?.tokens)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn vocabulary(&self) -> Vec<String> {
        (**self).vocabulary()
    }
    fn next_token_logprobs(&self, ctx: &Context<'_>, prefix: &[String]) -> Result<TokenDistribution> {
        (**self).next_token_logprobs(ctx, prefix)
    }
    fn token_logprob(&self, ctx: &Context<'_>, prefix: &[String], token: &str) -> Result<f64> {
        (**self).token_logprob(ctx, prefix, token)
    }
    fn candidate_logprobs(&self, ctx: &Context<'_>, prefix: &[String], candidates: &[&str]) -> Result<Vec<f64>> {
        (**self).candidate_logprobs(ctx, prefix, candidates)
    }
    fn token_logprobs(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<Vec<f64>> {
        (**self).token_logprobs(ctx, tokens)
    }
    fn sequence_logprob(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<f64> {
        (**self).sequence_logprob(ctx, tokens)
    }
    fn beam_generate(&self, ctx: &Context<'_>, k: usize, max_len: usize) -> Result<Vec<String>> {
        (**self).beam_generate(ctx, k, max_len)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Box<T> {
    fn vocabulary(&self) -> Vec<String> {
        (**self).vocabulary()
    }
    fn next_token_logprobs(&self, ctx: &Context<'_>, prefix: &[String]) -> Result<TokenDistribution> {
        (**self).next_token_logprobs(ctx, prefix)
    }
    fn token_logprob(&self, ctx: &Context<'_>, prefix: &[String], token: &str) -> Result<f64> {
        (**self).token_logprob(ctx, prefix, token)
    }
    fn candidate_logprobs(&self, ctx: &Context<'_>, prefix: &[String], candidates: &[&str]) -> Result<Vec<f64>> {
        (**self).candidate_logprobs(ctx, prefix, candidates)
    }
    fn token_logprobs(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<Vec<f64>> {
        (**self).token_logprobs(ctx, tokens)
    }
    fn sequence_logprob(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<f64> {
        (**self).sequence_logprob(ctx, tokens)
    }
    fn beam_generate(&self, ctx: &Context<'_>, k: usize, max_len: usize) -> Result<Vec<String>> {
        (**self).beam_generate(ctx, k, max_len)
    }
}
