//! Inference: content selection inside a template and surface realization
//! over the templates of an input's cluster.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lm::{Context, LanguageModel};
use crate::model::{cluster_key, fill, tokenize, Choice, DataInput, FilledOutput, Template, TemplateToken};
use crate::template_set::{ClusterEntry, TemplateSet};

/// How values of multi-valued fields are picked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Left to right, pick the value whose first token is most likely.
    #[default]
    Greedy,
    /// Score every combination of values with the full sequence
    /// probability. Exponential in the number of multi-valued slots.
    Exact,
}

/// Upper bound on fills enumerated by [`Selection::Exact`].
pub const EXACT_LIMIT: usize = 1 << 14;

fn check_fields(t: &Template, d: &DataInput) -> Result<()> {
    match t.fields().into_iter().find(|f| !d.has_field(f)) {
        Some(f) => Err(Error::MissingField(f.to_owned())),
        None => Ok(()),
    }
}

/// Fills `t` with `d`, choosing among multiple values of a field.
pub fn select_content<M: LanguageModel + ?Sized>(
    t: &Template,
    d: &DataInput,
    backend: &M,
    selection: Selection,
) -> Result<FilledOutput> {
    check_fields(t, d)?;
    let choice = match selection {
        Selection::Greedy => greedy_choice(t, d, backend)?,
        Selection::Exact => exact_choice(t, d, backend)?,
    };
    fill(t, d, &choice)
}

fn greedy_choice<M: LanguageModel + ?Sized>(t: &Template, d: &DataInput, backend: &M) -> Result<Choice> {
    let ctx = Context::ltr(d);
    let mut choice = Choice::new();
    let mut prefix: Vec<String> = Vec::new();
    for (j, token) in t.tokens().iter().enumerate() {
        match token {
            TemplateToken::Terminal(w) => prefix.push(w.clone()),
            TemplateToken::Nonterminal(field) => {
                let values = d.values(field).ok_or_else(|| Error::MissingField(field.clone()))?;
                let mut best = 0;
                if values.len() > 1 {
                    let firsts: Vec<&str> = values
                        .iter()
                        .map(|v| v.split_whitespace().next().unwrap_or(""))
                        .collect();
                    let scores = backend.candidate_logprobs(&ctx, &prefix, &firsts)?;
                    for (i, s) in scores.iter().enumerate() {
                        if *s > scores[best] {
                            best = i;
                        }
                    }
                }
                choice.set(j, best);
                prefix.extend(tokenize(&values[best]));
            }
        }
    }
    Ok(choice)
}

fn exact_choice<M: LanguageModel + ?Sized>(t: &Template, d: &DataInput, backend: &M) -> Result<Choice> {
    let slots: Vec<(usize, usize)> = t
        .tokens()
        .iter()
        .enumerate()
        .filter_map(|(j, tok)| match tok {
            TemplateToken::Nonterminal(f) => Some((j, d.values(f).map_or(0, <[String]>::len))),
            TemplateToken::Terminal(_) => None,
        })
        .filter(|(_, n)| *n > 1)
        .collect();
    let combos = slots
        .iter()
        .try_fold(1usize, |acc, (_, n)| acc.checked_mul(*n).filter(|c| *c <= EXACT_LIMIT))
        .ok_or_else(|| Error::InvalidParameter(format!("more than {EXACT_LIMIT} fills to enumerate")))?;
    let ctx = Context::ltr(d);
    let mut best: Option<(f64, Choice)> = None;
    for mut code in 0..combos {
        let mut choice = Choice::new();
        for (j, n) in slots.iter().rev() {
            choice.set(*j, code % n);
            code /= n;
        }
        let lp = backend.sequence_logprob(&ctx, &fill(t, d, &choice)?.tokens)?;
        // Enumeration order is lexicographic, so strict > keeps the
        // smallest choice among ties.
        if best.as_ref().map_or(true, |(b, _)| lp > *b) {
            best = Some((lp, choice));
        }
    }
    Ok(best.map(|(_, c)| c).unwrap_or_default())
}

/// Checks that every output token comes from a terminal of `t` or from a
/// value of `d` in the slot it fills.
pub fn check_provenance(t: &Template, d: &DataInput, out: &FilledOutput) -> Result<()> {
    let mut next = 0;
    for (j, token) in t.tokens().iter().enumerate() {
        let span = out.alignment.get(j).cloned().unwrap_or(next..next);
        let words = &out.tokens[span.start.min(out.tokens.len())..span.end.min(out.tokens.len())];
        let ok = span.start == next
            && match token {
                TemplateToken::Terminal(w) => words.len() == 1 && &words[0] == w,
                TemplateToken::Nonterminal(f) => d.values(f).is_some_and(|vs| {
                    vs.iter()
                        .any(|v| v.split_whitespace().eq(words.iter().map(String::as_str)))
                }),
            };
        if !ok {
            let position = span.start.min(out.tokens.len().saturating_sub(1));
            return Err(Error::ProvenanceViolation {
                position,
                token: out.tokens.get(position).cloned().unwrap_or_default(),
            });
        }
        next = span.end;
    }
    if next != out.tokens.len() {
        return Err(Error::ProvenanceViolation {
            position: next,
            token: out.tokens[next].clone(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RealizeOptions {
    /// Fall back to the largest cluster whose fields the input covers when
    /// its own cluster has no usable template.
    pub fallback: bool,
    pub selection: Selection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub text: String,
    pub template_id: String,
    pub logprob: f64,
    pub filled: FilledOutput,
    /// True when the template came from a fallback cluster.
    pub fallback: bool,
}

fn cluster_fields(entry: &ClusterEntry) -> BTreeSet<&str> {
    match entry.key.field_set() {
        Some(fields) => fields.iter().map(String::as_str).collect(),
        None => entry.examples.first().map(|d| d.fields().collect()).unwrap_or_default(),
    }
}

fn covered<'a>(entry: &'a ClusterEntry, d: &DataInput) -> Vec<&'a Template> {
    entry
        .usable()
        .into_iter()
        .filter(|t| t.fields().iter().all(|f| d.has_field(f)))
        .collect()
}

/// Fills every usable template of `d`'s cluster and returns the one the
/// backend scores highest. Ties go to the smaller template id.
pub fn realize<M: LanguageModel + ?Sized>(
    d: &DataInput,
    ts: &TemplateSet,
    backend: &M,
    options: RealizeOptions,
) -> Result<Realization> {
    let key = cluster_key(d, &ts.policy);
    let own = ts.cluster(&key).map(|c| c.usable()).unwrap_or_default();
    let (templates, fallback) = if !own.is_empty() {
        (own, false)
    } else if options.fallback {
        let best = ts
            .clusters
            .iter()
            .filter(|c| cluster_fields(c).iter().all(|f| d.has_field(f)))
            .map(|c| (c, covered(c, d)))
            .filter(|(_, ts)| !ts.is_empty())
            // max_by_key keeps the last maximum; iterate in reverse so the
            // smallest key wins ties.
            .rev()
            .max_by_key(|(c, _)| cluster_fields(c).len());
        match best {
            Some((_, ts)) => (ts, true),
            None => return Err(Error::NoTemplateForCluster(key)),
        }
    } else {
        return Err(Error::NoTemplateForCluster(key));
    };

    let ctx = Context::ltr(d);
    let mut best: Option<Realization> = None;
    for t in templates {
        let filled = select_content(t, d, backend, options.selection)?;
        check_provenance(t, d, &filled)?;
        let logprob = backend.sequence_logprob(&ctx, &filled.tokens)?;
        let better = match &best {
            None => true,
            Some(b) => logprob > b.logprob || (logprob == b.logprob && t.id < b.template_id),
        };
        if better {
            best = Some(Realization {
                text: filled.text(),
                template_id: t.id.clone(),
                logprob,
                filled,
                fallback,
            });
        }
    }
    best.ok_or(Error::NoTemplateForCluster(key))
}

/// Realizes a batch in parallel; results keep input order.
pub fn realize_batch<M: LanguageModel + ?Sized>(
    inputs: &[DataInput],
    ts: &TemplateSet,
    backend: &M,
    options: RealizeOptions,
) -> Vec<Result<Realization>> {
    inputs.par_iter().map(|d| realize(d, ts, backend, options)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::{NGramConfig, NGramModel};
    use crate::model::{ClusterKey, ClusterPolicy, TemplateStatus};
    use crate::template_set::{ClusterEntry, TemplateRecord};

    fn d(pairs: &[(&str, &[&str])]) -> DataInput {
        DataInput::from_pairs("d", pairs.iter().map(|(f, vs)| (*f, vs.iter().copied()))).unwrap()
    }

    fn bigram(corpus: &[(&DataInput, &str)]) -> NGramModel {
        NGramModel::train(corpus.iter().copied(), NGramConfig::with_order(2)).unwrap()
    }

    #[test]
    fn single_value_needs_no_choice() {
        let input = d(&[("food", &["Indian"])]);
        let lm = NGramModel::untrained(["x"], NGramConfig::default()).unwrap();
        let t = Template::parse("[food] food").unwrap();
        assert_eq!(
            select_content(&t, &input, &lm, Selection::Greedy).unwrap().text(),
            "Indian food"
        );
    }

    #[test]
    fn article_follows_training_text() {
        let train = d(&[("food", &["Indian"])]);
        let lm = bigram(&[(&train, "an Indian place")]);
        let input = d(&[("article", &["a", "an"]), ("food", &["Indian"])]);
        let t = Template::parse("[article] [food] place").unwrap();
        let out = select_content(&t, &input, &lm, Selection::Greedy).unwrap();
        assert_eq!(out.text(), "an Indian place");
    }

    #[test]
    fn missing_field_is_reported() {
        let input = d(&[("name", &["A"])]);
        let lm = NGramModel::untrained(["x"], NGramConfig::default()).unwrap();
        let t = Template::parse("[food]").unwrap();
        assert!(matches!(
            select_content(&t, &input, &lm, Selection::Greedy),
            Err(Error::MissingField(f)) if f == "food"
        ));
    }

    #[test]
    fn exact_selection_maximizes_sequence_probability() {
        let train = d(&[("x", &["q"])]);
        // "p a" is the more likely first token, but only "p b" continues well.
        let mut corpus = vec![(&train, "s p a"); 5];
        corpus.extend(vec![(&train, "s r b t"); 3]);
        let lm = bigram(&corpus);
        let input = d(&[("f", &["p b", "r b"])]);
        let t = Template::parse("s [f] t").unwrap();
        let ctx = Context::ltr(&input);
        let score = |c: usize| {
            lm.sequence_logprob(&ctx, &fill(&t, &input, &Choice::new().with(1, c)).unwrap().tokens)
                .unwrap()
        };
        let oracle = if score(0) >= score(1) { 0 } else { 1 };
        let exact = select_content(&t, &input, &lm, Selection::Exact).unwrap();
        assert_eq!(exact.choice.get(1), oracle);
        assert_eq!(oracle, 1);
        let greedy = select_content(&t, &input, &lm, Selection::Greedy).unwrap();
        assert_eq!(greedy.choice.get(1), 0);
    }

    #[test]
    fn provenance_rejects_foreign_tokens() {
        let input = d(&[("name", &["Aromi"])]);
        let t = Template::parse("[name] is good").unwrap();
        let mut out = fill(&t, &input, &Choice::new()).unwrap();
        check_provenance(&t, &input, &out).unwrap();
        out.tokens[0] = "Zizzi".into();
        assert!(matches!(
            check_provenance(&t, &input, &out),
            Err(Error::ProvenanceViolation { position: 0, .. })
        ));
    }

    fn set_with(templates: &[(&str, &str, TemplateStatus)], key: ClusterKey) -> TemplateSet {
        let mut entry = ClusterEntry::new(key, Vec::new());
        for (id, text, status) in templates {
            let t = Template::parse(text).unwrap().with_id(*id).with_status(*status);
            entry.templates.push(TemplateRecord::new(t));
        }
        let mut ts = TemplateSet::new(ClusterPolicy::default());
        ts.clusters.push(entry);
        ts
    }

    #[test]
    fn realize_picks_the_likelier_template() {
        let train = d(&[("name", &["A"])]);
        let lm = bigram(&[(&train, "A is good"), (&train, "A is good"), (&train, "A was bad")]);
        let ts = set_with(
            &[
                ("t1", "[name] was bad", TemplateStatus::Validated),
                ("t2", "[name] is good", TemplateStatus::Validated),
            ],
            ClusterKey::combination(["name"]),
        );
        let input = d(&[("name", &["B"])]);
        let ctx = Context::ltr(&input);
        let s1 = lm.sequence_logprob(&ctx, &tokenize("B was bad")).unwrap();
        let s2 = lm.sequence_logprob(&ctx, &tokenize("B is good")).unwrap();
        assert!(s2 > s1);
        let r = realize(&input, &ts, &lm, RealizeOptions::default()).unwrap();
        assert_eq!((r.text.as_str(), r.template_id.as_str()), ("B is good", "t2"));
        assert_eq!(r.logprob, s2);
    }

    #[test]
    fn unseen_cluster_needs_fallback() {
        let lm = NGramModel::untrained(["x"], NGramConfig::default()).unwrap();
        let ts = set_with(
            &[("t1", "[name] .", TemplateStatus::Approved)],
            ClusterKey::combination(["name"]),
        );
        let input = d(&[("name", &["B"]), ("food", &["Thai"])]);
        assert!(matches!(
            realize(&input, &ts, &lm, RealizeOptions::default()),
            Err(Error::NoTemplateForCluster(_))
        ));
        let options = RealizeOptions {
            fallback: true,
            ..RealizeOptions::default()
        };
        let r = realize(&input, &ts, &lm, options).unwrap();
        assert_eq!(r.text, "B .");
        assert!(r.fallback);
    }

    #[test]
    fn rejected_templates_are_never_used() {
        let lm = NGramModel::untrained(["x"], NGramConfig::default()).unwrap();
        let ts = set_with(
            &[("t1", "[name] .", TemplateStatus::Rejected)],
            ClusterKey::combination(["name"]),
        );
        let input = d(&[("name", &["B"])]);
        assert!(realize(&input, &ts, &lm, RealizeOptions::default()).is_err());
    }
}
