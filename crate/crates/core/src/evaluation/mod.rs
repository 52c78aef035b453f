//! Matching-based faithfulness: find verbalized data values in an output
//! through a table of paraphrases and compare them with the input.

mod metrics;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{bleu, rouge_l, rouge_l_sentence, ROUGE_BETA};

use crate::error::{Error, Result};
use crate::model::{DataInput, Template, TemplateToken};

const E2E_TABLE: &str = include_str!("../../data/e2e_phrases.json");

/// Paraphrases per field and value. Lookup is case-insensitive.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhraseTable(BTreeMap<String, BTreeMap<String, Vec<String>>>);

impl PhraseTable {
    pub fn new() -> Self {
        PhraseTable::default()
    }

    /// The restaurant-domain starter table.
    pub fn e2e() -> Self {
        PhraseTable::from_json(E2E_TABLE).expect("bundled table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: PhraseTable = serde_json::from_str(text)?;
        for (field, values) in &table.0 {
            for (value, phrases) in values {
                if phrases.iter().any(|p| p.trim().is_empty()) {
                    return Err(Error::Config(format!("empty paraphrase for {field} = {value}")));
                }
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        PhraseTable::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, field: impl Into<String>, value: impl Into<String>, phrase: impl Into<String>) {
        let phrase = phrase.into();
        assert!(!phrase.trim().is_empty(), "paraphrases are non-empty");
        self.0
            .entry(field.into())
            .or_default()
            .entry(value.into())
            .or_default()
            .push(phrase);
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Explicit paraphrases of a value.
    pub fn phrases(&self, field: &str, value: &str) -> &[String] {
        self.0
            .get(field)
            .and_then(|vs| vs.iter().find(|(v, _)| v.eq_ignore_ascii_case(value)))
            .map_or(&[], |(_, ps)| ps.as_slice())
    }

    /// Every `(field, value, phrase)` triple.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.0.iter().flat_map(|(f, vs)| {
            vs.iter()
                .flat_map(move |(v, ps)| ps.iter().map(move |p| (f.as_str(), v.as_str(), p.as_str())))
        })
    }
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

fn occurrences(haystack: &[String], needle: &[String]) -> Vec<Range<usize>> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&i| haystack[i..i + needle.len()] == *needle)
        .map(|i| i..i + needle.len())
        .collect()
}

fn contains(haystack: &[String], phrase: &str) -> bool {
    !occurrences(haystack, &lower_tokens(phrase)).is_empty()
}

/// Every `(field, value)` one of whose paraphrases occurs in `output` as a
/// contiguous token sequence, ignoring case.
pub fn match_phrasings(output: &str, table: &PhraseTable) -> BTreeSet<(String, String)> {
    let tokens = lower_tokens(output);
    table
        .entries()
        .filter(|(_, _, p)| contains(&tokens, p))
        .map(|(f, v, _)| (f.to_owned(), v.to_owned()))
        .collect()
}

/// One verbalized phrase: where it occurs and which values it may stand for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseMatch {
    pub field: String,
    pub phrase: String,
    pub span: Range<usize>,
    pub values: BTreeSet<String>,
}

/// Phrase occurrences per field, longest phrase first; an occurrence that
/// overlaps a longer accepted one of the same field is not counted again.
pub fn phrase_matches(output: &str, table: &PhraseTable) -> Vec<PhraseMatch> {
    let tokens = lower_tokens(output);
    let mut out = Vec::new();
    for field in table.fields() {
        let mut by_phrase: BTreeMap<Vec<String>, (String, BTreeSet<String>)> = BTreeMap::new();
        for (f, v, p) in table.entries() {
            if f == field {
                by_phrase
                    .entry(lower_tokens(p))
                    .or_insert_with(|| (p.to_owned(), BTreeSet::new()))
                    .1
                    .insert(v.to_owned());
            }
        }
        let mut phrases: Vec<(Vec<String>, (String, BTreeSet<String>))> = by_phrase.into_iter().collect();
        phrases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let mut taken = vec![false; tokens.len()];
        let mut found = Vec::new();
        for (needle, (phrase, values)) in phrases {
            for span in occurrences(&tokens, &needle) {
                if taken[span.clone()].iter().any(|t| *t) {
                    continue;
                }
                taken[span.clone()].iter_mut().for_each(|t| *t = true);
                found.push(PhraseMatch {
                    field: field.to_owned(),
                    phrase: phrase.clone(),
                    span,
                    values: values.clone(),
                });
            }
        }
        found.sort_by_key(|m| m.span.start);
        out.extend(found);
    }
    out
}

fn has_value(d: &DataInput, field: &str, values: &BTreeSet<String>) -> bool {
    d.values(field)
        .is_some_and(|vs| vs.iter().any(|v| values.iter().any(|w| w.eq_ignore_ascii_case(v))))
}

/// Phrase occurrences that are hallucinated (field absent from `d`) or
/// inconsistent (no value the phrase stands for is in `d`).
pub fn precision_errors(output: &str, d: &DataInput, table: &PhraseTable) -> usize {
    phrase_matches(output, table)
        .iter()
        .filter(|m| !has_value(d, &m.field, &m.values))
        .count()
}

/// Fields of `d` none of whose values is verbalized, either by a
/// paraphrase or literally.
pub fn recall_errors(output: &str, d: &DataInput, table: &PhraseTable) -> usize {
    let tokens = lower_tokens(output);
    d.entries()
        .iter()
        .filter(|(field, values)| {
            !values
                .iter()
                .any(|v| contains(&tokens, v) || table.phrases(field, v).iter().any(|p| contains(&tokens, p)))
        })
        .count()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub id: String,
    pub matched: Vec<(String, String)>,
    pub precision_errors: usize,
    pub recall_errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub examples: Vec<ExampleReport>,
    #[serde(rename = "E_precision")]
    pub e_precision: usize,
    #[serde(rename = "E_recall")]
    pub e_recall: usize,
}

/// Faithfulness of `(input, output)` pairs. Inputs should be the raw,
/// un-augmented data.
pub fn faithfulness<'a>(
    pairs: impl IntoIterator<Item = (&'a DataInput, &'a str)>,
    table: &PhraseTable,
) -> FaithfulnessReport {
    let examples: Vec<ExampleReport> = pairs
        .into_iter()
        .map(|(d, out)| ExampleReport {
            id: d.id().to_owned(),
            matched: match_phrasings(out, table).into_iter().collect(),
            precision_errors: precision_errors(out, d, table),
            recall_errors: recall_errors(out, d, table),
        })
        .collect();
    FaithfulnessReport {
        e_precision: examples.iter().map(|e| e.precision_errors).sum(),
        e_recall: examples.iter().map(|e| e.recall_errors).sum(),
        examples,
    }
}

/// Whether a run of terminals in `t` spells a paraphrase or a value seen in
/// the corpus.
pub fn is_lexicalized(t: &Template, phrases: &[Vec<String>]) -> bool {
    let mut runs: Vec<Vec<String>> = vec![Vec::new()];
    for tok in t.tokens() {
        match tok {
            TemplateToken::Terminal(w) => runs.last_mut().unwrap().push(w.to_lowercase()),
            TemplateToken::Nonterminal(_) => runs.push(Vec::new()),
        }
    }
    runs.iter()
        .any(|run| phrases.iter().any(|p| !occurrences(run, p).is_empty()))
}

/// Paraphrases of the table and raw values of the corpus, as lowercased
/// token sequences.
pub fn lexicalized_phrases(table: &PhraseTable, corpus: &[DataInput]) -> Vec<Vec<String>> {
    let mut phrases: BTreeSet<Vec<String>> = table.entries().map(|(_, _, p)| lower_tokens(p)).collect();
    for d in corpus {
        for values in d.entries().values() {
            phrases.extend(values.iter().map(|v| lower_tokens(v)));
        }
    }
    phrases.remove(&Vec::new());
    phrases.into_iter().collect()
}

/// Fraction of templates containing a lexicalized value.
pub fn audit_lexicalized<'a>(
    templates: impl IntoIterator<Item = &'a Template>,
    table: &PhraseTable,
    corpus: &[DataInput],
) -> f64 {
    let phrases = lexicalized_phrases(table, corpus);
    let (mut flagged, mut total) = (0usize, 0usize);
    for t in templates {
        total += 1;
        if is_lexicalized(t, &phrases) {
            flagged += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        flagged as f64 / total as f64
    }
}
