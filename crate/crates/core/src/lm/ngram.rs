//! Absolute-discount n-gram backend.
//!
//! Each training pair `(d, x)` becomes the sequence
//! `linearize(d) [BOS] x END`; only the text part and END are prediction
//! targets, the linearized input serves as conditioning history. Levels are
//! interpolated:
//!
//! ```text
//! P(w | h) = max(c(h, w) - D, 0) / c(h) + D * T(h) / c(h) * P(w | h')
//! ```
//!
//! where `h'` drops the oldest token of `h`, `T(h)` counts distinct
//! continuations and the recursion bottoms out in a uniform distribution
//! over the vocabulary and END that reserves a fixed floor mass for unseen
//! tokens. An optional copy component mixes in the empirical distribution of
//! the input's value tokens:
//!
//! ```text
//! P(w | h, d) = (1 - λ) P(w | h) + λ C_d(w)
//! ```
//!
//! Tokens that were values of a field in training but are absent from `d`
//! keep only a fraction γ of their n-gram probability. The removed mass
//! `R_f(h)` goes to the tokens of the same field `f` in `d`, so a value slot
//! is filled from the input:
//!
//! ```text
//! P(w | h, d) = (1 - λ) γ_d(w) P(w | h) + λ C_d(w) + (1 - λ) Σ_f R_f(h) C_{d,f}(w)
//! ```
//!
//! A token seen under several fields splits its removed mass among the
//! fields of `d` in proportion to its training counts.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{linearize, Context, LanguageModel, Mode, TokenDistribution, END, UNK};
use crate::error::{Error, Result};
use crate::model::{tokenize, DataInput};

/// Marks the start of the text after the linearized input.
pub const BOS: &str = "[BOS]";

const FORMAT_VERSION: u32 = 1;

/// Training parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NGramConfig {
    pub order: usize,
    pub discount: f64,
    /// Probability mass of the uniform base distribution reserved for
    /// unknown tokens.
    pub unknown_floor: f64,
    /// Weight λ of the copy component; 0 disables it.
    pub copy_weight: f64,
    /// Factor γ kept by training value tokens absent from the input; 1
    /// disables the discount.
    pub foreign_value_weight: f64,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig {
            order: 3,
            discount: 0.4,
            unknown_floor: 1e-7,
            copy_weight: 0.05,
            foreign_value_weight: 0.25,
        }
    }
}

impl NGramConfig {
    pub fn with_order(order: usize) -> Self {
        NGramConfig {
            order,
            ..NGramConfig::default()
        }
    }

    fn check(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidParameter("order must be at least 1".into()));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::InvalidParameter("discount must lie in (0, 1)".into()));
        }
        if !(self.unknown_floor > 0.0 && self.unknown_floor < 1.0) {
            return Err(Error::InvalidParameter("unknown floor must lie in (0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.copy_weight) {
            return Err(Error::InvalidParameter("copy weight must lie in [0, 1)".into()));
        }
        if !(self.foreign_value_weight > 0.0 && self.foreign_value_weight <= 1.0) {
            return Err(Error::InvalidParameter(
                "foreign value weight must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
struct ContextCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// A trained n-gram model. Immutable after training.
#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    config: NGramConfig,
    symbols: Vec<String>,
    index: HashMap<String, u32>,
    /// Sorted ids of prediction targets other than END.
    vocab: Vec<u32>,
    end: u32,
    /// Per field, training counts of each value token.
    values: BTreeMap<String, BTreeMap<u32, u64>>,
    /// `targets[id]` is true for vocabulary ids and END.
    targets: Vec<bool>,
    /// `tables[m]` holds contexts of length `m`.
    tables: Vec<HashMap<Vec<u32>, ContextCounts>>,
}

impl NGramModel {
    /// Trains on `(input, text)` pairs.
    pub fn train<'a, I>(corpus: I, config: NGramConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a DataInput, &'a str)>,
    {
        config.check()?;
        let mut model = NGramModel::empty(config);
        let mut seen = false;
        for (d, text) in corpus {
            seen = true;
            model.add(d, &tokenize(text));
        }
        if !seen {
            return Err(Error::EmptyCorpus);
        }
        model.finish();
        Ok(model)
    }

    /// A model with a vocabulary but no counts: uniform over the vocabulary
    /// and END.
    pub fn untrained<I, S>(vocabulary: I, config: NGramConfig) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        config.check()?;
        let mut model = NGramModel::empty(config);
        for w in vocabulary {
            let id = model.intern(&w.into());
            model.vocab.push(id);
        }
        model.finish();
        Ok(model)
    }

    fn empty(config: NGramConfig) -> Self {
        let mut model = NGramModel {
            tables: vec![HashMap::new(); config.order],
            config,
            symbols: Vec::new(),
            index: HashMap::new(),
            vocab: Vec::new(),
            end: 0,
            values: BTreeMap::new(),
            targets: Vec::new(),
        };
        model.end = model.intern(END);
        model
    }

    fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    fn add(&mut self, d: &DataInput, text: &[String]) {
        let mut seq: Vec<u32> = linearize(d).iter().map(|t| self.intern(t)).collect();
        for (field, vals) in d.entries() {
            for tok in vals.iter().flat_map(|v| v.split_whitespace()) {
                let id = self.intern(tok);
                *self.values.entry(field.clone()).or_default().entry(id).or_default() += 1;
            }
        }
        seq.push(self.intern(BOS));
        let text_start = seq.len();
        for tok in text {
            let id = self.intern(tok);
            self.vocab.push(id);
            seq.push(id);
        }
        seq.push(self.end);
        for pos in text_start..seq.len() {
            let target = seq[pos];
            for m in 0..self.config.order {
                if m > pos {
                    break;
                }
                let ctx = seq[pos - m..pos].to_vec();
                let entry = self.tables[m].entry(ctx).or_default();
                entry.total += 1;
                *entry.next.entry(target).or_default() += 1;
            }
        }
    }

    fn finish(&mut self) {
        self.vocab
            .sort_by(|a, b| self.symbols[*a as usize].cmp(&self.symbols[*b as usize]));
        self.vocab.dedup();
        self.targets = target_mask(self.symbols.len(), &self.vocab, self.end);
    }

    pub fn config(&self) -> &NGramConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    /// Count of `token` following `context` (a context of length m < order).
    pub fn count(&self, context: &[&str], token: &str) -> u64 {
        let Some(ids) = self.lookup(context) else { return 0 };
        let Some(&tok) = self.index.get(token) else { return 0 };
        self.tables
            .get(ids.len())
            .and_then(|t| t.get(&ids))
            .and_then(|c| c.next.get(&tok))
            .copied()
            .unwrap_or(0)
    }

    fn lookup(&self, tokens: &[&str]) -> Option<Vec<u32>> {
        tokens.iter().map(|t| self.index.get(*t).copied()).collect()
    }

    fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn is_target(&self, id: u32) -> bool {
        self.targets.get(id as usize).copied().unwrap_or(false)
    }

    fn conditioned<'m>(&'m self, d: &DataInput) -> Conditioned<'m> {
        let mut head: Vec<Option<u32>> = linearize(d).iter().map(|t| self.id_of(t)).collect();
        head.push(self.id_of(BOS));
        let mut copy: HashMap<String, f64> = HashMap::new();
        let mut copy_total = 0.0;
        for tok in d.value_tokens() {
            *copy.entry(tok.to_owned()).or_default() += 1.0;
            copy_total += 1.0;
        }
        for c in copy.values_mut() {
            *c /= copy_total;
        }
        let lambda = if copy_total > 0.0 { self.config.copy_weight } else { 0.0 };
        let mut foreign = Vec::new();
        let mut slots = Vec::new();
        if copy_total > 0.0 && self.config.foreign_value_weight < 1.0 {
            foreign = vec![false; self.symbols.len()];
            slots = self.slots(d, &copy, &mut foreign);
        }
        Conditioned {
            model: self,
            head,
            copy,
            lambda,
            foreign,
            slots,
        }
    }

    /// One slot per field of `d` with foreign training values, marking
    /// those values in `foreign`.
    fn slots(&self, d: &DataInput, own: &HashMap<String, f64>, foreign: &mut [bool]) -> Vec<Slot> {
        let fields: Vec<(&str, &BTreeMap<u32, u64>)> =
            d.fields().filter_map(|f| self.values.get(f).map(|v| (f, v))).collect();
        let mut slots = Vec::new();
        for (f, counts) in &fields {
            let mut weights = Vec::new();
            for (&id, &c) in counts.iter() {
                if !self.is_target(id) || own.contains_key(&self.symbols[id as usize]) {
                    continue;
                }
                let all: u64 = fields.iter().filter_map(|(_, v)| v.get(&id)).sum();
                foreign[id as usize] = true;
                weights.push((id, c as f64 / all as f64));
            }
            if weights.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = d.values(f).unwrap().iter().flat_map(|v| v.split_whitespace()).collect();
            let mut copy: HashMap<String, f64> = HashMap::new();
            for t in &tokens {
                *copy.entry((*t).to_owned()).or_default() += 1.0 / tokens.len() as f64;
            }
            slots.push(Slot { weights, copy });
        }
        slots
    }

    /// Uniform base probability of a target or of the unknown bucket.
    fn base_prob(&self, target: Option<u32>) -> f64 {
        match target {
            Some(_) => (1.0 - self.config.unknown_floor) / (self.vocab.len() + 1) as f64,
            None => self.config.unknown_floor,
        }
    }

    /// Interpolated n-gram probability; `target = None` is the unknown bucket.
    fn ngram_prob(&self, hist: &[Option<u32>], target: Option<u32>) -> f64 {
        let mut p = self.base_prob(target);
        let d = self.config.discount;
        let mut key: Vec<u32> = Vec::with_capacity(hist.len());
        for m in 0..self.config.order {
            if m > hist.len() {
                break;
            }
            // Context of length m: the last m history tokens.
            let ctx = &hist[hist.len() - m..];
            if ctx.iter().any(Option::is_none) {
                break;
            }
            key.clear();
            key.extend(ctx.iter().map(|t| t.unwrap()));
            let Some(counts) = self.tables[m].get(&key) else { break };
            let total = counts.total as f64;
            let c = target.and_then(|t| counts.next.get(&t)).copied().unwrap_or(0) as f64;
            let types = counts.next.len() as f64;
            p = (c - d).max(0.0) / total + d * types / total * p;
        }
        p
    }

    /// `Σ weight(w) P(w | h)` over weighted targets, by the same recursion
    /// as [`ngram_prob`](Self::ngram_prob).
    fn weighted_mass(&self, hist: &[Option<u32>], weights: &[(u32, f64)]) -> f64 {
        let mut s = weights.iter().map(|(_, w)| w).sum::<f64>() * self.base_prob(Some(0));
        let d = self.config.discount;
        let mut key: Vec<u32> = Vec::with_capacity(hist.len());
        for m in 0..self.config.order {
            if m > hist.len() {
                break;
            }
            let ctx = &hist[hist.len() - m..];
            if ctx.iter().any(Option::is_none) {
                break;
            }
            key.clear();
            key.extend(ctx.iter().map(|t| t.unwrap()));
            let Some(counts) = self.tables[m].get(&key) else { break };
            let total = counts.total as f64;
            let direct: f64 = weights
                .iter()
                .filter_map(|(t, w)| counts.next.get(t).map(|c| w * (*c as f64 - d).max(0.0)))
                .sum();
            s = direct / total + d * counts.next.len() as f64 / total * s;
        }
        s
    }

    /// Serializes the model to JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_json()?.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        NGramModel::from_json(&fs::read_to_string(path)?)
    }
}

impl LanguageModel for NGramModel {
    fn vocabulary(&self) -> Vec<String> {
        self.vocab.iter().map(|id| self.symbols[*id as usize].clone()).collect()
    }

    fn next_token_logprobs(&self, ctx: &Context<'_>, prefix: &[String]) -> Result<TokenDistribution> {
        let cond = self.conditioned(ctx.data);
        Ok(match ctx.mode {
            Mode::LeftToRight => cond.distribution(prefix),
            Mode::Infill { left, right } => cond.infill(left, right, prefix),
        })
    }

    fn token_logprob(&self, ctx: &Context<'_>, prefix: &[String], token: &str) -> Result<f64> {
        match ctx.mode {
            Mode::LeftToRight => Ok(self.conditioned(ctx.data).logprob(prefix, token)),
            Mode::Infill { .. } => Ok(self.next_token_logprobs(ctx, prefix)?.logprob(token)),
        }
    }

    fn candidate_logprobs(&self, ctx: &Context<'_>, prefix: &[String], candidates: &[&str]) -> Result<Vec<f64>> {
        match ctx.mode {
            Mode::LeftToRight => {
                let cond = self.conditioned(ctx.data);
                let hist = cond.history(prefix);
                Ok(candidates.iter().map(|c| cond.logprob_hist(&hist, c)).collect())
            }
            Mode::Infill { .. } => {
                let dist = self.next_token_logprobs(ctx, prefix)?;
                Ok(candidates.iter().map(|c| dist.logprob(c)).collect())
            }
        }
    }

    fn token_logprobs(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<Vec<f64>> {
        match ctx.mode {
            Mode::LeftToRight => {
                let cond = self.conditioned(ctx.data);
                Ok((0..tokens.len())
                    .map(|j| cond.logprob(&tokens[..j], &tokens[j]))
                    .collect())
            }
            Mode::Infill { .. } => (0..tokens.len())
                .map(|j| self.token_logprob(ctx, &tokens[..j], &tokens[j]))
                .collect(),
        }
    }

    fn sequence_logprob(&self, ctx: &Context<'_>, tokens: &[String]) -> Result<f64> {
        if tokens.is_empty() {
            return Err(Error::InvalidParameter("cannot score an empty sequence".into()));
        }
        let body: f64 = self.token_logprobs(ctx, tokens)?.iter().sum();
        Ok(body + self.token_logprob(ctx, tokens, END)?)
    }
}

fn target_mask(n: usize, vocab: &[u32], end: u32) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &id in vocab.iter().chain(std::iter::once(&end)) {
        mask[id as usize] = true;
    }
    mask
}

/// The model conditioned on one input: linearized head and copy
/// distribution computed once.
struct Conditioned<'m> {
    model: &'m NGramModel,
    head: Vec<Option<u32>>,
    copy: HashMap<String, f64>,
    lambda: f64,
    /// Training value tokens absent from the input; empty when the discount
    /// is off.
    foreign: Vec<bool>,
    slots: Vec<Slot>,
}

/// Where the mass removed from one field's foreign values goes.
struct Slot {
    /// Foreign token ids and the share of their mass owed to this field.
    weights: Vec<(u32, f64)>,
    /// Token distribution of the field's values in the input.
    copy: HashMap<String, f64>,
}

impl Conditioned<'_> {
    /// Ids of the last `order - 1` positions before the next token; `None`
    /// marks a token the model has never seen.
    fn history(&self, prefix: &[String]) -> Vec<Option<u32>> {
        let want = self.model.config.order - 1;
        let mut hist: Vec<Option<u32>> = Vec::with_capacity(want);
        let take_prefix = prefix.len().min(want);
        let need = want - take_prefix;
        hist.extend_from_slice(&self.head[self.head.len().saturating_sub(need)..]);
        hist.extend(prefix[prefix.len() - take_prefix..].iter().map(|t| self.model.id_of(t)));
        hist
    }

    fn logprob(&self, prefix: &[String], token: &str) -> f64 {
        self.logprob_hist(&self.history(prefix), token)
    }

    fn is_foreign(&self, id: u32) -> bool {
        self.foreign.get(id as usize).copied().unwrap_or(false)
    }

    fn gamma(&self, id: u32) -> f64 {
        if self.is_foreign(id) {
            self.model.config.foreign_value_weight
        } else {
            1.0
        }
    }

    /// Copy probability of `token` given the mass `removed[i]` freed for
    /// slot `i`.
    fn copy_prob(&self, token: &str, removed: &[f64]) -> f64 {
        let mut p = self.lambda * self.copy.get(token).copied().unwrap_or(0.0);
        for (slot, r) in self.slots.iter().zip(removed) {
            if let Some(c) = slot.copy.get(token) {
                p += (1.0 - self.lambda) * r * c;
            }
        }
        p
    }

    fn logprob_hist(&self, hist: &[Option<u32>], token: &str) -> f64 {
        let model = self.model;
        let target = model.id_of(token).filter(|id| model.is_target(*id));
        let copy = if self.copy.contains_key(token) {
            let keep = 1.0 - model.config.foreign_value_weight;
            let removed: Vec<f64> = self
                .slots
                .iter()
                .map(|s| {
                    if s.copy.contains_key(token) {
                        keep * model.weighted_mass(hist, &s.weights)
                    } else {
                        0.0
                    }
                })
                .collect();
            self.copy_prob(token, &removed)
        } else {
            0.0
        };
        let p = match target {
            Some(id) => (1.0 - self.lambda) * self.gamma(id) * model.ngram_prob(hist, target) + copy,
            None if copy > 0.0 => copy,
            None => (1.0 - self.lambda) * model.ngram_prob(hist, None),
        };
        p.ln()
    }

    fn distribution(&self, prefix: &[String]) -> TokenDistribution {
        let model = self.model;
        let hist = self.history(prefix);
        let lambda = self.lambda;
        let probs: Vec<(u32, f64)> = model
            .vocab
            .iter()
            .chain(std::iter::once(&model.end))
            .map(|&id| (id, model.ngram_prob(&hist, Some(id))))
            .collect();
        let keep = 1.0 - model.config.foreign_value_weight;
        let removed: Vec<f64> = self
            .slots
            .iter()
            .map(|slot| {
                let p: HashMap<u32, f64> = slot.weights.iter().map(|(id, w)| (*id, *w)).collect();
                keep * probs.iter().filter_map(|(id, q)| p.get(id).map(|w| w * q)).sum::<f64>()
            })
            .collect();
        let mut entries = BTreeMap::new();
        for (id, p_ng) in probs {
            let word = &model.symbols[id as usize];
            let p = (1.0 - lambda) * self.gamma(id) * p_ng + self.copy_prob(word, &removed);
            entries.insert(word.clone(), p.ln());
        }
        let unk = ((1.0 - lambda) * model.ngram_prob(&hist, None)).ln();
        entries.insert(UNK.to_owned(), unk);
        for word in self.copy.keys() {
            if !entries.contains_key(word) {
                entries.insert(word.clone(), self.copy_prob(word, &removed).ln());
            }
        }
        TokenDistribution::new(entries, unk)
    }

    /// Infill distribution: each candidate `y` is scored by the
    /// left-to-right probability of `left + prefix + y + right + END`,
    /// END (closing the gap) by `left + prefix + right + END`, then
    /// renormalized. Terms whose n-gram window lies entirely inside `right`
    /// are shared by all candidates and cancel.
    fn infill(&self, left: &[String], right: &[String], prefix: &[String]) -> TokenDistribution {
        let window = self.model.config.order - 1;
        let mut seq: Vec<String> = Vec::with_capacity(left.len() + prefix.len() + 1 + right.len());
        seq.extend_from_slice(left);
        seq.extend_from_slice(prefix);
        let head = self.distribution(&seq);

        let shared_from = window.min(right.len());
        let continuation = |seq: &mut Vec<String>| -> f64 {
            let start = seq.len();
            let mut total = 0.0;
            for tok in &right[..shared_from] {
                total += self.logprob(seq, tok);
                seq.push(tok.clone());
            }
            if right.len() < window {
                total += self.logprob(seq, END);
            }
            seq.truncate(start);
            total
        };

        let mut scores = BTreeMap::new();
        for (word, lp) in head.entries() {
            if word == END {
                scores.insert(END.to_owned(), continuation(&mut seq));
                continue;
            }
            seq.push(word.to_owned());
            let cont = continuation(&mut seq);
            seq.pop();
            scores.insert(word.to_owned(), lp + cont);
        }
        TokenDistribution::from_log_scores(scores, UNK)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: NGramConfig,
    symbols: Vec<String>,
    vocab: Vec<u32>,
    values: BTreeMap<String, Vec<(u32, u64)>>,
    contexts: Vec<ContextRecord>,
}

#[derive(Serialize, Deserialize)]
struct ContextRecord {
    context: Vec<u32>,
    next: Vec<(u32, u64)>,
}

impl From<&NGramModel> for ModelFile {
    fn from(model: &NGramModel) -> Self {
        let mut contexts: Vec<ContextRecord> = model
            .tables
            .iter()
            .flat_map(|table| table.iter())
            .map(|(ctx, counts)| {
                let mut next: Vec<(u32, u64)> = counts.next.iter().map(|(k, v)| (*k, *v)).collect();
                next.sort_unstable();
                ContextRecord {
                    context: ctx.clone(),
                    next,
                }
            })
            .collect();
        contexts.sort_by(|a, b| (a.context.len(), &a.context).cmp(&(b.context.len(), &b.context)));
        ModelFile {
            version: FORMAT_VERSION,
            config: model.config.clone(),
            symbols: model.symbols.clone(),
            vocab: model.vocab.clone(),
            values: model
                .values
                .iter()
                .map(|(f, c)| (f.clone(), c.iter().map(|(k, v)| (*k, *v)).collect()))
                .collect(),
            contexts,
        }
    }
}

impl ModelFile {
    fn into_model(self) -> Result<NGramModel> {
        if self.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.version,
                expected: FORMAT_VERSION,
            });
        }
        self.config.check()?;
        let n = self.symbols.len() as u32;
        let bad = |what: &str| Error::InvalidParameter(format!("corrupt model file: {what}"));
        let index: HashMap<String, u32> = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        let end = *index.get(END).ok_or_else(|| bad("missing END symbol"))?;
        let values: BTreeMap<String, BTreeMap<u32, u64>> = self
            .values
            .into_iter()
            .map(|(f, c)| (f, c.into_iter().collect()))
            .collect();
        if self
            .vocab
            .iter()
            .chain(values.values().flat_map(|c| c.keys()))
            .any(|&v| v >= n)
        {
            return Err(bad("vocabulary id out of range"));
        }
        let mut tables = vec![HashMap::new(); self.config.order];
        for rec in self.contexts {
            let m = rec.context.len();
            if m >= self.config.order || rec.context.iter().any(|&t| t >= n) {
                return Err(bad("context out of range"));
            }
            let mut counts = ContextCounts::default();
            for (tok, c) in rec.next {
                if tok >= n {
                    return Err(bad("target id out of range"));
                }
                counts.total += c;
                counts.next.insert(tok, c);
            }
            tables[m].insert(rec.context, counts);
        }
        let targets = target_mask(self.symbols.len(), &self.vocab, end);
        Ok(NGramModel {
            config: self.config,
            symbols: self.symbols,
            index,
            vocab: self.vocab,
            values,
            end,
            targets,
            tables,
        })
    }
}
