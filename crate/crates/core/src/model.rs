//! Shared data model: inputs, templates, clusters and filled outputs.
//!
//! Text is handled at whitespace-token granularity throughout. Templates are
//! written as space-separated words with nonterminal fields in brackets,
//! e.g. `[name] is a [food] restaurant`. A literal `[` inside a word is
//! written `[[`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Splits already space-separated text into tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// One input `d`: field names mapped to ordered, non-empty value lists.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDataInput", into = "RawDataInput")]
pub struct DataInput {
    id: String,
    entries: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct RawDataInput {
    id: String,
    data: BTreeMap<String, Vec<String>>,
}

impl TryFrom<RawDataInput> for DataInput {
    type Error = Error;

    fn try_from(raw: RawDataInput) -> Result<Self> {
        DataInput::new(raw.id, raw.data)
    }
}

impl From<DataInput> for RawDataInput {
    fn from(d: DataInput) -> Self {
        RawDataInput {
            id: d.id,
            data: d.entries,
        }
    }
}

impl DataInput {
    pub fn new(id: impl Into<String>, entries: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let id = id.into();
        for (field, values) in &entries {
            let invalid = |reason: String| Error::InvalidInput { id: id.clone(), reason };
            if field.trim().is_empty() {
                return Err(invalid("empty field name".into()));
            }
            if field.contains(['[', ']']) {
                return Err(invalid(format!("field name `{field}` contains a bracket")));
            }
            if values.is_empty() {
                return Err(invalid(format!("field `{field}` has no values")));
            }
            if values.iter().any(|v| v.split_whitespace().next().is_none()) {
                return Err(invalid(format!("field `{field}` has an empty value")));
            }
        }
        Ok(DataInput { id, entries })
    }

    /// Builds an input from `(field, values)` pairs. Later duplicates of a
    /// field name replace earlier ones.
    pub fn from_pairs<I, F, V, S>(id: impl Into<String>, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (F, V)>,
        F: Into<String>,
        V: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = pairs
            .into_iter()
            .map(|(f, vs)| (f.into(), vs.into_iter().map(Into::into).collect()))
            .collect();
        DataInput::new(id, entries)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<String>> {
        &self.entries
    }

    pub fn values(&self, field: &str) -> Option<&[String]> {
        self.entries.get(field).map(Vec::as_slice)
    }

    pub fn has_field(&self, field: &str) -> bool {
        self.entries.contains_key(field)
    }

    /// Field names in sorted order.
    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Tokens of every value of every field, in field then value order.
    pub fn value_tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.values().flatten().flat_map(|v| v.split_whitespace())
    }

    /// Replaces (or inserts) a field. Empty value lists remove the field.
    pub fn set_field(&mut self, field: impl Into<String>, values: Vec<String>) -> Result<()> {
        let field = field.into();
        if values.is_empty() {
            self.entries.remove(&field);
            return Ok(());
        }
        let mut probe = BTreeMap::new();
        probe.insert(field.clone(), values.clone());
        DataInput::new(self.id.clone(), probe)?;
        self.entries.insert(field, values);
        Ok(())
    }

    pub fn remove_field(&mut self, field: &str) -> Option<Vec<String>> {
        self.entries.remove(field)
    }
}

/// A template token: a literal word or a field slot.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateToken {
    Terminal(String),
    Nonterminal(String),
}

impl TemplateToken {
    pub fn terminal(word: impl Into<String>) -> Self {
        TemplateToken::Terminal(word.into())
    }

    pub fn field(name: impl Into<String>) -> Self {
        TemplateToken::Nonterminal(name.into())
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, TemplateToken::Terminal(_))
    }

    pub fn text(&self) -> &str {
        match self {
            TemplateToken::Terminal(w) | TemplateToken::Nonterminal(w) => w,
        }
    }
}

impl fmt::Display for TemplateToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateToken::Terminal(w) => f.write_str(&w.replace('[', "[[")),
            TemplateToken::Nonterminal(field) => write!(f, "[{field}]"),
        }
    }
}

/// Lifecycle of a template from extraction to human review.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateStatus {
    #[default]
    Candidate,
    Validated,
    Refined,
    Approved,
    Rejected,
}

impl TemplateStatus {
    /// Whether inference may use a template with this status.
    pub fn is_deployable(self) -> bool {
        matches!(
            self,
            TemplateStatus::Validated | TemplateStatus::Refined | TemplateStatus::Approved
        )
    }
}

impl fmt::Display for TemplateStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemplateStatus::Candidate => "candidate",
            TemplateStatus::Validated => "validated",
            TemplateStatus::Refined => "refined",
            TemplateStatus::Approved => "approved",
            TemplateStatus::Rejected => "rejected",
        };
        f.write_str(s)
    }
}

/// The unit of extraction, refinement and inspection.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Template {
    pub id: String,
    tokens: Vec<TemplateToken>,
    pub source_id: String,
    pub cluster: ClusterKey,
    pub status: TemplateStatus,
}

impl Template {
    pub fn new(tokens: Vec<TemplateToken>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::MalformedTemplate {
                text: String::new(),
                reason: "template has no tokens".into(),
            });
        }
        for tok in &tokens {
            let bad = match tok {
                TemplateToken::Terminal(w) => w.is_empty() || w.contains(char::is_whitespace),
                TemplateToken::Nonterminal(f) => f.trim().is_empty() || f.contains(['[', ']']),
            };
            if bad {
                return Err(Error::MalformedTemplate {
                    text: render(&tokens),
                    reason: format!("invalid token {tok:?}"),
                });
            }
        }
        Ok(Template {
            id: String::new(),
            tokens,
            source_id: String::new(),
            cluster: ClusterKey::FieldCombination(Vec::new()),
            status: TemplateStatus::Candidate,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Template::new(parse_tokens(text)?)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_source(mut self, source_id: impl Into<String>, cluster: ClusterKey) -> Self {
        self.source_id = source_id.into();
        self.cluster = cluster;
        self
    }

    pub fn with_status(mut self, status: TemplateStatus) -> Self {
        self.status = status;
        self
    }

    pub fn tokens(&self) -> &[TemplateToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Text form; parses back to the same tokens.
    pub fn text(&self) -> String {
        render(&self.tokens)
    }

    /// Distinct field names referenced by the template.
    pub fn fields(&self) -> BTreeSet<&str> {
        fields_of(self)
    }

    pub fn nonterminal_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_terminal()).count()
    }

    /// Same template with different tokens; metadata is kept.
    pub fn replace_tokens(&self, tokens: Vec<TemplateToken>) -> Result<Self> {
        let fresh = Template::new(tokens)?;
        Ok(Template {
            tokens: fresh.tokens,
            ..self.clone()
        })
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::parse(s)
    }
}

/// Renders tokens in the bracket syntax.
pub fn render(tokens: &[TemplateToken]) -> String {
    let mut out = String::new();
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&tok.to_string());
    }
    out
}

/// Parses the bracket syntax. Field names may contain spaces
/// (`[customer rating]`); words may not.
pub fn parse_tokens(text: &str) -> Result<Vec<TemplateToken>> {
    let malformed = |reason: &str| Error::MalformedTemplate {
        text: text.to_owned(),
        reason: reason.to_owned(),
    };
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        if chars[i] == '[' && chars.get(i + 1) != Some(&'[') {
            let close = chars[i + 1..]
                .iter()
                .position(|&c| c == ']')
                .ok_or_else(|| malformed("unterminated field"))?
                + i
                + 1;
            let name: String = chars[i + 1..close].iter().collect();
            if name.trim().is_empty() {
                return Err(malformed("empty field name"));
            }
            if name.contains('[') {
                return Err(malformed("`[` inside a field name"));
            }
            if let Some(&c) = chars.get(close + 1) {
                if !c.is_whitespace() {
                    return Err(malformed("field must be followed by whitespace"));
                }
            }
            tokens.push(TemplateToken::Nonterminal(name));
            i = close + 1;
            continue;
        }
        let mut word = String::new();
        while i < chars.len() && !chars[i].is_whitespace() {
            if chars[i] == '[' {
                if chars.get(i + 1) == Some(&'[') {
                    word.push('[');
                    i += 2;
                    continue;
                }
                return Err(malformed("unescaped `[` inside a word"));
            }
            word.push(chars[i]);
            i += 1;
        }
        tokens.push(TemplateToken::Terminal(word));
    }
    Ok(tokens)
}

/// Exact set of field names used by `t`.
pub fn fields_of(t: &Template) -> BTreeSet<&str> {
    t.tokens
        .iter()
        .filter_map(|tok| match tok {
            TemplateToken::Nonterminal(f) => Some(f.as_str()),
            TemplateToken::Terminal(_) => None,
        })
        .collect()
}

/// Value choice per nonterminal occurrence, keyed by template token index.
/// Occurrences without an entry use the first value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Choice(BTreeMap<usize, usize>);

impl Choice {
    pub fn new() -> Self {
        Choice::default()
    }

    pub fn set(&mut self, token_index: usize, value_index: usize) {
        self.0.insert(token_index, value_index);
    }

    pub fn with(mut self, token_index: usize, value_index: usize) -> Self {
        self.set(token_index, value_index);
        self
    }

    pub fn get(&self, token_index: usize) -> usize {
        self.0.get(&token_index).copied().unwrap_or(0)
    }
}

impl FromIterator<(usize, usize)> for Choice {
    fn from_iter<I: IntoIterator<Item = (usize, usize)>>(iter: I) -> Self {
        Choice(iter.into_iter().collect())
    }
}

/// Result of filling a template with data, with per-token alignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilledOutput {
    pub tokens: Vec<String>,
    /// One output span per template token, in template order.
    pub alignment: Vec<Range<usize>>,
    pub choice: Choice,
    pub template_ref: String,
    pub data_ref: String,
}

impl FilledOutput {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn span(&self, template_index: usize) -> &[String] {
        &self.tokens[self.alignment[template_index].clone()]
    }
}

/// Fills `t` with values from `d`. Terminals are copied, each nonterminal is
/// replaced by the tokens of its chosen value.
pub fn fill(t: &Template, d: &DataInput, choice: &Choice) -> Result<FilledOutput> {
    let mut tokens = Vec::with_capacity(t.len());
    let mut alignment = Vec::with_capacity(t.len());
    for (j, tok) in t.tokens().iter().enumerate() {
        let start = tokens.len();
        match tok {
            TemplateToken::Terminal(w) => tokens.push(w.clone()),
            TemplateToken::Nonterminal(field) => {
                let values = d.values(field).ok_or_else(|| Error::MissingField(field.clone()))?;
                let index = choice.get(j);
                let value = values.get(index).ok_or_else(|| Error::IndexOutOfRange {
                    field: field.clone(),
                    index,
                    len: values.len(),
                })?;
                tokens.extend(value.split_whitespace().map(str::to_owned));
            }
        }
        alignment.push(start..tokens.len());
    }
    Ok(FilledOutput {
        tokens,
        alignment,
        choice: choice.clone(),
        template_ref: t.id.clone(),
        data_ref: d.id().to_owned(),
    })
}

/// Cluster identity of an input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterKey {
    /// Sorted set of present field names.
    FieldCombination(Vec<String>),
    /// The value of one designated field; `None` when the field is absent.
    FieldValue { field: String, value: Option<String> },
}

impl ClusterKey {
    pub fn combination<I, S>(fields: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = fields.into_iter().map(Into::into).collect();
        ClusterKey::FieldCombination(set.into_iter().collect())
    }

    /// Field names when the key is a field combination.
    pub fn field_set(&self) -> Option<&[String]> {
        match self {
            ClusterKey::FieldCombination(fields) => Some(fields),
            ClusterKey::FieldValue { .. } => None,
        }
    }
}

impl fmt::Display for ClusterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterKey::FieldCombination(fields) => f.write_str(&fields.join("|")),
            ClusterKey::FieldValue { field, value } => {
                write!(f, "{field}={}", value.as_deref().unwrap_or("∅"))
            }
        }
    }
}

/// How inputs are grouped into clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterPolicy {
    /// Group by the set of present fields, ignoring `exclude`
    /// (augmentation-only fields).
    FieldCombination {
        #[serde(default)]
        exclude: BTreeSet<String>,
    },
    /// Group by the value of one field.
    FieldValue { field: String },
}

impl Default for ClusterPolicy {
    fn default() -> Self {
        ClusterPolicy::FieldCombination {
            exclude: BTreeSet::new(),
        }
    }
}

/// Canonical cluster key of `d` under `policy`.
pub fn cluster_key(d: &DataInput, policy: &ClusterPolicy) -> ClusterKey {
    match policy {
        ClusterPolicy::FieldCombination { exclude } => ClusterKey::FieldCombination(
            d.fields()
                .filter(|f| !exclude.contains(*f))
                .map(str::to_owned)
                .collect(),
        ),
        ClusterPolicy::FieldValue { field } => {
            let value = d.values(field).map(|vs| {
                let mut sorted: Vec<&str> = vs.iter().map(String::as_str).collect();
                sorted.sort_unstable();
                sorted.dedup();
                sorted.join(" | ")
            });
            ClusterKey::FieldValue {
                field: field.clone(),
                value,
            }
        }
    }
}
