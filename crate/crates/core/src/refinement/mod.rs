//! Template refinement: find spans that do not generalize across the
//! cluster, cut them out along constituent boundaries, and regenerate them
//! with consensus beam search.

mod cbs;
mod parse;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cbs::{consensus_beam_search, consensus_candidates, greedy_value, CbsResult, GapContext};
pub use parse::{check_nested, HeuristicChunker, ParseProvider, SidecarParser, DEFAULT_STOP_WORDS};

use crate::error::{Error, Result};
use crate::inference::{select_content, Selection};
use crate::lm::{Context, LanguageModel};
use crate::model::{DataInput, Template, TemplateStatus, TemplateToken};
use crate::validation::template_generalizability;

/// Per template token: mean log-probability of its aligned output tokens.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenGeneralizability {
    pub template_id: String,
    pub scores: Vec<f64>,
    /// Aligned output tokens per template token, summed over the cluster.
    pub counts: Vec<usize>,
}

/// Scores every template token by the chain-rule log-probability of the
/// output tokens it produced, averaged over the cluster. A field's score is
/// the joint probability of its value tokens.
pub fn token_generalizability<M: LanguageModel + ?Sized>(
    t: &Template,
    examples: &[DataInput],
    backend: &M,
    selection: Selection,
) -> Result<TokenGeneralizability> {
    if examples.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot score a template on an empty cluster".into(),
        ));
    }
    let per_example: Vec<(Vec<f64>, Vec<usize>)> = examples
        .par_iter()
        .map(|d| {
            let filled = select_content(t, d, backend, selection)?;
            let lps = backend.token_logprobs(&Context::ltr(d), &filled.tokens)?;
            Ok(filled
                .alignment
                .iter()
                .map(|span| (lps[span.clone()].iter().sum::<f64>(), span.len()))
                .unzip())
        })
        .collect::<Result<_>>()?;
    let n = examples.len() as f64;
    let mut scores = vec![0.0; t.len()];
    let mut counts = vec![0; t.len()];
    for (s, c) in &per_example {
        for j in 0..t.len() {
            scores[j] += s[j];
            counts[j] += c[j];
        }
    }
    scores.iter_mut().for_each(|s| *s /= n);
    Ok(TokenGeneralizability {
        template_id: t.id.clone(),
        scores,
        counts,
    })
}

/// One removed span `[start, end)` and its mean token score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemovedSpan {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
}

/// A template token or a gap left by a removed span.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    Token(TemplateToken),
    Gap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialTemplate(pub Vec<Slot>);

impl PartialTemplate {
    pub fn gaps(&self) -> usize {
        self.0.iter().filter(|s| **s == Slot::Gap).count()
    }

    /// Tokens with every gap dropped.
    pub fn without_gaps(&self) -> Vec<TemplateToken> {
        self.0
            .iter()
            .filter_map(|s| match s {
                Slot::Token(t) => Some(t.clone()),
                Slot::Gap => None,
            })
            .collect()
    }
}

impl std::fmt::Display for PartialTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match s {
                Slot::Token(t) => write!(f, "{t}")?,
                Slot::Gap => f.write_str("___")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanRemovalResult {
    pub partial: PartialTemplate,
    pub removed: Vec<RemovedSpan>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Removes every constituent whose mean token score is below `threshold`.
/// Nested flagged constituents collapse into the outermost one, and
/// overlapping or adjacent removals become a single gap.
pub fn find_ungeneralizable_spans(
    t: &Template,
    tg: &TokenGeneralizability,
    parser: &dyn ParseProvider,
    threshold: f64,
) -> Result<SpanRemovalResult> {
    if !(threshold < 0.0) {
        return Err(Error::InvalidParameter("threshold must be negative".into()));
    }
    if tg.scores.len() != t.len() {
        return Err(Error::InvalidParameter("token scores do not match the template".into()));
    }
    let mut flagged: Vec<Range<usize>> = parser
        .constituents(t)?
        .into_iter()
        .filter(|s| s.start < s.end && s.end <= t.len())
        .filter(|s| mean(&tg.scores[s.clone()]) < threshold)
        .collect();
    flagged.sort_by_key(|s| (s.start, std::cmp::Reverse(s.end)));

    let mut merged: Vec<Range<usize>> = Vec::new();
    for s in flagged {
        match merged.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }

    let mut slots = Vec::new();
    let mut pos = 0;
    for span in &merged {
        slots.extend(t.tokens()[pos..span.start].iter().cloned().map(Slot::Token));
        slots.push(Slot::Gap);
        pos = span.end;
    }
    slots.extend(t.tokens()[pos..].iter().cloned().map(Slot::Token));
    Ok(SpanRemovalResult {
        partial: PartialTemplate(slots),
        removed: merged
            .into_iter()
            .map(|s| RemovedSpan {
                start: s.start,
                end: s.end,
                mean: mean(&tg.scores[s]),
            })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefineConfig {
    pub threshold: f64,
    pub beam_size: usize,
    pub max_length: usize,
    pub selection: Selection,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            threshold: -2.0,
            beam_size: 5,
            max_length: 10,
            selection: Selection::Greedy,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineOutcome {
    pub template: Template,
    pub removed: Vec<RemovedSpan>,
    /// Cluster total before and after.
    pub before: f64,
    pub after: f64,
}

impl RefineOutcome {
    pub fn changed(&self) -> bool {
        self.after > self.before
    }
}

/// Realizes `left ++ right` for `d` and splits the output at the boundary.
fn realize_sides<M: LanguageModel + ?Sized>(
    left: &[TemplateToken],
    right: &[TemplateToken],
    d: &DataInput,
    backend: &M,
    selection: Selection,
) -> Result<(Vec<String>, Vec<String>)> {
    let all: Vec<TemplateToken> = left.iter().chain(right).cloned().collect();
    if all.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let filled = select_content(&Template::new(all)?, d, backend, selection)?;
    let cut = filled
        .alignment
        .get(left.len())
        .map_or(filled.tokens.len(), |s| s.start);
    let mut tokens = filled.tokens;
    let right = tokens.split_off(cut);
    Ok((tokens, right))
}

fn assemble(t: &Template, spans: &[RemovedSpan], fills: &[Vec<TemplateToken>], upto: usize) -> Vec<TemplateToken> {
    let mut out = Vec::new();
    let mut pos = 0;
    for (span, fill) in spans.iter().zip(fills).take(upto) {
        out.extend_from_slice(&t.tokens()[pos..span.start]);
        out.extend_from_slice(fill);
        pos = span.end;
    }
    let end = spans.get(upto).map_or(t.len(), |s| s.start);
    out.extend_from_slice(&t.tokens()[pos..end]);
    out
}

/// Refines `t` against its cluster.
///
/// Gaps are processed left to right. For each gap every final hypothesis of
/// the consensus search, the empty infill and the original span compete by
/// cluster total, so the total never decreases. Returns `t` unchanged when
/// nothing falls below the threshold.
pub fn refine<M: LanguageModel + ?Sized>(
    t: &Template,
    examples: &[DataInput],
    backend: &M,
    parser: &dyn ParseProvider,
    config: &RefineConfig,
) -> Result<RefineOutcome> {
    let tg = token_generalizability(t, examples, backend, config.selection)?;
    let removal = find_ungeneralizable_spans(t, &tg, parser, config.threshold)?;
    let before = template_generalizability(t, examples, backend, config.selection)?.total;
    if removal.removed.is_empty() {
        return Ok(RefineOutcome {
            template: t.clone(),
            removed: Vec::new(),
            before,
            after: before,
        });
    }
    let spans = removal.removed.clone();
    let mut fills: Vec<Vec<TemplateToken>> = spans.iter().map(|s| t.tokens()[s.start..s.end].to_vec()).collect();
    let mut current = before;

    for g in 0..spans.len() {
        let left = assemble(t, &spans, &fills, g);
        // Right side: up to the end with later gaps dropped.
        let mut right = Vec::new();
        let mut pos = spans[g].end;
        for s in &spans[g + 1..] {
            right.extend_from_slice(&t.tokens()[pos..s.start]);
            pos = s.end;
        }
        right.extend_from_slice(&t.tokens()[pos..]);

        let sides: Vec<(Vec<String>, Vec<String>)> = examples
            .par_iter()
            .map(|d| realize_sides(&left, &right, d, backend, config.selection))
            .collect::<Result<_>>()?;
        let contexts: Vec<GapContext<'_>> = examples
            .iter()
            .zip(sides)
            .map(|(d, (l, r))| GapContext {
                data: d,
                left: l,
                right: r,
            })
            .collect();
        let found = consensus_candidates(&contexts, backend, config.beam_size, config.max_length)?;
        log::debug!(
            "template {} gap {}: search proposes `{}` (mean {:.3})",
            t.id,
            g,
            crate::model::render(&found[0].tokens),
            found[0].mean
        );

        let original = fills[g].clone();
        let options = found.into_iter().map(|c| c.tokens).chain([Vec::new()]);
        for option in options {
            if option == original {
                continue;
            }
            let mut trial = fills.clone();
            trial[g] = option;
            let tokens = assemble(t, &spans, &trial, spans.len());
            if tokens.is_empty() {
                continue;
            }
            let total =
                template_generalizability(&t.replace_tokens(tokens)?, examples, backend, config.selection)?.total;
            if total > current {
                current = total;
                fills = trial;
            }
        }
    }

    let tokens = assemble(t, &spans, &fills, spans.len());
    let template = if tokens == t.tokens() {
        t.clone()
    } else {
        t.replace_tokens(tokens)?.with_status(TemplateStatus::Refined)
    };
    Ok(RefineOutcome {
        template,
        removed: removal.removed,
        before,
        after: current,
    })
}
