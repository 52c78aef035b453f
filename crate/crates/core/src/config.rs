//! Pipeline configuration and input augmentation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Selection;
use crate::lm::NGramConfig;
use crate::model::{ClusterPolicy, DataInput};

/// Where the language model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// A saved n-gram model.
    Ngram { path: String },
    /// An HTTP bridge; `TEMPLM_BRIDGE_URL` overrides `url`.
    Remote { url: String },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Ngram {
            path: "model.json".into(),
        }
    }
}

/// Extra fields added to (or rewritten on) every input at load time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Augmentation {
    /// Adds `field` with a fixed list of values, e.g. `article: [a, an]`.
    Constant { field: String, values: Vec<String> },
    /// Rewrites values of an existing field; unmapped values are kept.
    Replace {
        field: String,
        map: BTreeMap<String, Vec<String>>,
    },
    /// Adds `field` with values looked up from the value of `source`
    /// (matched case-insensitively), or `default` when nothing matches.
    Lookup {
        source: String,
        field: String,
        map: BTreeMap<String, Vec<String>>,
        default: Vec<String>,
    },
    /// Parses a date value into `<field>_day`, `<field>_month` and
    /// `<field>_year`.
    DateParts { field: String },
}

const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

fn month_name(i: usize) -> String {
    let m = MONTHS[i];
    m[..1].to_uppercase() + &m[1..]
}

/// `(day, month, year)` from `12 March 1950`, `March 12 , 1950` or
/// `1950-03-12`.
pub fn parse_date(value: &str) -> Option<(u32, String, u32)> {
    let iso: Vec<&str> = value.trim().split('-').collect();
    if let [y, m, d] = iso[..] {
        let (y, m, d) = (y.parse().ok()?, m.parse::<usize>().ok()?, d.parse().ok()?);
        if (1..=12).contains(&m) && (1..=31).contains(&d) {
            return Some((d, month_name(m - 1), y));
        }
        return None;
    }
    let (mut day, mut month, mut year) = (None, None, None);
    for tok in value.split(|c: char| c.is_whitespace() || c == ',') {
        if tok.is_empty() {
            continue;
        }
        let lower = tok.to_lowercase();
        if let Some(i) = MONTHS.iter().position(|m| *m == lower) {
            month = Some(month_name(i));
        } else if let Ok(n) = tok.parse::<u32>() {
            if tok.len() == 4 {
                year = Some(n);
            } else if (1..=31).contains(&n) {
                day = Some(n);
            }
        }
    }
    Some((day?, month?, year?))
}

impl Augmentation {
    /// Fields this augmentation adds (never present in raw inputs).
    pub fn added_fields(&self) -> Vec<String> {
        match self {
            Augmentation::Constant { field, .. } | Augmentation::Lookup { field, .. } => vec![field.clone()],
            Augmentation::Replace { .. } => Vec::new(),
            Augmentation::DateParts { field } => ["day", "month", "year"]
                .iter()
                .map(|p| format!("{field}_{p}"))
                .collect(),
        }
    }

    pub fn apply(&self, d: &mut DataInput) -> Result<()> {
        match self {
            Augmentation::Constant { field, values } => d.set_field(field.clone(), values.clone()),
            Augmentation::Replace { field, map } => {
                let Some(values) = d.values(field) else { return Ok(()) };
                let mut out: Vec<String> = Vec::new();
                for v in values {
                    for r in map.get(v).cloned().unwrap_or_else(|| vec![v.clone()]) {
                        if !out.contains(&r) {
                            out.push(r);
                        }
                    }
                }
                d.set_field(field.clone(), out)
            }
            Augmentation::Lookup {
                source,
                field,
                map,
                default,
            } => {
                let Some(values) = d.values(source) else { return Ok(()) };
                let hit = values.iter().find_map(|v| {
                    map.iter()
                        .find(|(k, _)| k.eq_ignore_ascii_case(v.trim()))
                        .map(|(_, vs)| vs.clone())
                });
                d.set_field(field.clone(), hit.unwrap_or_else(|| default.clone()))
            }
            Augmentation::DateParts { field } => {
                let Some((day, month, year)) = d.values(field).and_then(|vs| vs.iter().find_map(|v| parse_date(v)))
                else {
                    return Ok(());
                };
                d.set_field(format!("{field}_day"), vec![day.to_string()])?;
                d.set_field(format!("{field}_month"), vec![month])?;
                d.set_field(format!("{field}_year"), vec![year.to_string()])
            }
        }
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| (*s).to_owned()).collect()
}

/// Restaurant-domain augmentation: readable family-friendliness values and
/// an article field.
pub fn e2e_augmentation() -> Vec<Augmentation> {
    vec![
        Augmentation::Replace {
            field: "familyFriendly".into(),
            map: BTreeMap::from([
                ("yes".into(), strings(&["family friendly", "family-friendly"])),
                ("no".into(), strings(&["not family friendly", "not family-friendly"])),
            ]),
        },
        Augmentation::Constant {
            field: "article".into(),
            values: strings(&["a", "an"]),
        },
    ]
}

/// Biography-domain augmentation: function-word fields, gendered pronouns
/// and relation, and date parts.
pub fn synthbio_augmentation() -> Vec<Augmentation> {
    let gendered = |field: &str, male: &str, female: &str, other: &str| Augmentation::Lookup {
        source: "gender".into(),
        field: field.into(),
        map: BTreeMap::from([
            ("male".into(), strings(&[male])),
            ("man".into(), strings(&[male])),
            ("female".into(), strings(&[female])),
            ("woman".into(), strings(&[female])),
        ]),
        default: strings(&[other]),
    };
    vec![
        Augmentation::Constant {
            field: "article".into(),
            values: strings(&["a", "an"]),
        },
        Augmentation::Constant {
            field: "be".into(),
            values: strings(&["is", "are", "was", "were"]),
        },
        Augmentation::Constant {
            field: "number".into(),
            values: strings(&[
                "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
            ]),
        },
        gendered("pronoun_a", "he", "she", "they"),
        gendered("pronoun_b", "him", "her", "them"),
        gendered("pronoun_c", "his", "her", "their"),
        gendered("relation", "son", "daughter", "child"),
        Augmentation::DateParts {
            field: "birth_date".into(),
        },
        Augmentation::DateParts {
            field: "death_date".into(),
        },
    ]
}

/// Every knob of a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub cluster: ClusterPolicy,
    pub augmentation: Vec<Augmentation>,
    /// Inputs per cluster after recombination.
    pub recombination_target: usize,
    /// Templates kept per cluster; defaults to 5 for field-combination
    /// clusters and 10 for field-value clusters.
    pub top_k: Option<usize>,
    /// Mean token log-probability under which a span is regenerated.
    pub threshold: f64,
    /// Beam size and length limit for generating initial outputs.
    pub generate_beam: usize,
    pub generate_max_length: usize,
    /// Beam size and length limit of consensus beam search.
    pub beam_size: usize,
    pub max_length: usize,
    pub seed: u64,
    pub selection: Selection,
    pub fallback: bool,
    pub backend: BackendConfig,
    pub ngram: NGramConfig,
    /// Function words for the heuristic chunker; `None` uses the built-in
    /// list.
    pub stop_words: Option<Vec<String>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cluster: ClusterPolicy::default(),
            augmentation: Vec::new(),
            recombination_target: 50,
            top_k: None,
            threshold: -2.0,
            generate_beam: 5,
            generate_max_length: 40,
            beam_size: 5,
            max_length: 10,
            seed: 0,
            selection: Selection::Greedy,
            fallback: false,
            backend: BackendConfig::default(),
            ngram: NGramConfig::default(),
            stop_words: None,
        }
    }
}

impl PipelineConfig {
    pub fn top_k(&self) -> usize {
        self.top_k.unwrap_or(match self.cluster {
            ClusterPolicy::FieldCombination { .. } => 5,
            ClusterPolicy::FieldValue { .. } => 10,
        })
    }

    pub fn augmented_fields(&self) -> BTreeSet<String> {
        self.augmentation.iter().flat_map(Augmentation::added_fields).collect()
    }

    /// The cluster policy with augmentation-only fields excluded.
    pub fn cluster_policy(&self) -> ClusterPolicy {
        match &self.cluster {
            ClusterPolicy::FieldCombination { exclude } => ClusterPolicy::FieldCombination {
                exclude: exclude.iter().cloned().chain(self.augmented_fields()).collect(),
            },
            other => other.clone(),
        }
    }

    pub fn augment(&self, d: &DataInput) -> Result<DataInput> {
        let mut d = d.clone();
        for a in &self.augmentation {
            a.apply(&mut d)?;
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("recombination_target", self.recombination_target),
            ("top_k", self.top_k()),
            ("generate_beam", self.generate_beam),
            ("generate_max_length", self.generate_max_length),
            ("beam_size", self.beam_size),
            ("max_length", self.max_length),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.threshold < 0.0) {
            return Err(Error::Config("threshold must be negative".into()));
        }
        Ok(())
    }
}
