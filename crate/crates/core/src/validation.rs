//! Template validation: cluster-level generalizability and top-K selection.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{select_content, Selection};
use crate::lm::{Context, LanguageModel};
use crate::model::{DataInput, Template, TemplateStatus, TemplateToken};

/// Log-probability of a template's fills summed over a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizabilityScore {
    pub template_id: String,
    pub total: f64,
    /// `(example id, log-probability)` in cluster order.
    pub per_example: Vec<(String, f64)>,
    pub mean: f64,
}

/// Scores `t` on every example: the sequence log-probability of its
/// content-selected fill, conditioned on that example.
pub fn template_generalizability<M: LanguageModel + ?Sized>(
    t: &Template,
    examples: &[DataInput],
    backend: &M,
    selection: Selection,
) -> Result<GeneralizabilityScore> {
    let per_example: Vec<(String, f64)> = examples
        .par_iter()
        .map(|d| {
            let filled = select_content(t, d, backend, selection)?;
            let lp = backend.sequence_logprob(&Context::ltr(d), &filled.tokens)?;
            Ok((d.id().to_owned(), lp))
        })
        .collect::<Result<_>>()?;
    let total: f64 = per_example.iter().map(|(_, lp)| lp).sum();
    let mean = if per_example.is_empty() {
        0.0
    } else {
        total / per_example.len() as f64
    };
    Ok(GeneralizabilityScore {
        template_id: t.id.clone(),
        total,
        per_example,
        mean,
    })
}

/// Lowercased value tokens occurring anywhere in `examples`.
pub fn value_vocabulary(examples: &[DataInput]) -> HashSet<String> {
    examples
        .iter()
        .flat_map(|d| d.value_tokens().map(str::to_lowercase).collect::<Vec<_>>())
        .collect()
}

/// Terminals of `t` that look like data values.
pub fn lexicalized_terminals(t: &Template, values: &HashSet<String>) -> usize {
    t.tokens()
        .iter()
        .filter(|tok| matches!(tok, TemplateToken::Terminal(w) if values.contains(&w.to_lowercase())))
        .count()
}

/// Ranking used by validation: higher total first, then fewer terminals
/// matching a data value, then template text.
pub fn rank_order(a: (&Template, f64, usize), b: (&Template, f64, usize)) -> Ordering {
    b.1.total_cmp(&a.1)
        .then(a.2.cmp(&b.2))
        .then_with(|| a.0.text().cmp(&b.0.text()))
}

/// Keeps the `k` best candidates, marked validated, with their scores.
pub fn validate_cluster<M: LanguageModel + ?Sized>(
    candidates: &[Template],
    examples: &[DataInput],
    backend: &M,
    k: usize,
    selection: Selection,
) -> Result<Vec<(Template, GeneralizabilityScore)>> {
    if k == 0 {
        return Err(Error::InvalidParameter("top-k must be at least 1".into()));
    }
    let values = value_vocabulary(examples);
    let mut scored: Vec<(Template, GeneralizabilityScore, usize)> = candidates
        .iter()
        .map(|t| {
            let score = template_generalizability(t, examples, backend, selection)?;
            Ok((t.clone(), score, lexicalized_terminals(t, &values)))
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| rank_order((&a.0, a.1.total, a.2), (&b.0, b.1.total, b.2)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(t, s, _)| (t.with_status(TemplateStatus::Validated), s))
        .collect())
}
