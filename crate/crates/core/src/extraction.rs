//! Initial template extraction: generate with the backend, delexicalize,
//! and widen coverage by recombining inputs within a cluster.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lm::{Context, LanguageModel};
use crate::model::{Choice, ClusterKey, DataInput, Template, TemplateToken};

struct ValueMatch<'a> {
    start: usize,
    len: usize,
    field: &'a str,
    value_index: usize,
}

/// Replaces value spans of `x` by field slots.
///
/// Every span matching a value of `d` (case-insensitively) is a candidate.
/// Longer spans win, then earlier ones, then the alphabetically first
/// field; accepted spans never overlap.
pub fn delexicalize(x: &[String], d: &DataInput) -> Result<Template> {
    delexicalize_with_choice(x, d).map(|(t, _)| t)
}

/// Like [`delexicalize`], also returning the value choice that fills the
/// template back into `x`. When several values of a field match, the one
/// equal to the span byte-for-byte is preferred.
pub fn delexicalize_with_choice(x: &[String], d: &DataInput) -> Result<(Template, Choice)> {
    if x.is_empty() {
        return Err(Error::MalformedTemplate {
            text: String::new(),
            reason: "cannot delexicalize an empty sequence".into(),
        });
    }
    let lower: Vec<String> = x.iter().map(|t| t.to_lowercase()).collect();
    let mut matches = Vec::new();
    for (field, values) in d.entries() {
        // Per (start, len): the matching value index, and whether it matched
        // byte-for-byte.
        let mut spans: BTreeMap<(usize, usize), (usize, bool)> = BTreeMap::new();
        for (vi, value) in values.iter().enumerate() {
            let vtoks: Vec<&str> = value.split_whitespace().collect();
            let vlower: Vec<String> = vtoks.iter().map(|t| t.to_lowercase()).collect();
            let n = vtoks.len();
            if n > x.len() {
                continue;
            }
            for start in 0..=x.len() - n {
                if lower[start..start + n] != vlower[..] {
                    continue;
                }
                let exact = x[start..start + n].iter().zip(&vtoks).all(|(a, b)| a == b);
                let entry = spans.entry((start, n)).or_insert((vi, exact));
                if exact && !entry.1 {
                    *entry = (vi, true);
                }
            }
        }
        matches.extend(spans.into_iter().map(|((start, len), (value_index, _))| ValueMatch {
            start,
            len,
            field,
            value_index,
        }));
    }
    matches.sort_by(|a, b| b.len.cmp(&a.len).then(a.start.cmp(&b.start)).then(a.field.cmp(b.field)));
    let mut covered = vec![false; x.len()];
    let mut accepted: Vec<&ValueMatch> = Vec::new();
    for m in &matches {
        if covered[m.start..m.start + m.len].iter().any(|&c| c) {
            continue;
        }
        covered[m.start..m.start + m.len].iter_mut().for_each(|c| *c = true);
        accepted.push(m);
    }
    accepted.sort_by_key(|m| m.start);

    let mut tokens = Vec::new();
    let mut choice = Choice::new();
    let mut pos = 0;
    let mut next = accepted.iter().peekable();
    while pos < x.len() {
        match next.peek() {
            Some(m) if m.start == pos => {
                choice.set(tokens.len(), m.value_index);
                tokens.push(TemplateToken::Nonterminal(m.field.to_owned()));
                pos += m.len;
                next.next();
            }
            _ => {
                tokens.push(TemplateToken::Terminal(x[pos].clone()));
                pos += 1;
            }
        }
    }
    Ok((Template::new(tokens)?, choice))
}

/// How a cluster is expanded by recombination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecombinationPlan {
    pub cluster: ClusterKey,
    /// Requested size; never below the number of originals.
    pub target_count: usize,
    /// Fields whose values may be swapped. Empty means every field.
    pub swap_fields: BTreeSet<String>,
}

impl RecombinationPlan {
    pub fn new(cluster: ClusterKey, target_count: usize) -> Self {
        RecombinationPlan {
            cluster,
            target_count,
            swap_fields: BTreeSet::new(),
        }
    }
}

/// Stable 64-bit mix of a seed and a label, so each cluster gets its own
/// reproducible stream regardless of processing order.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Data recombination within one cluster.
///
/// Returns the originals followed by synthetic inputs until
/// `plan.target_count` is reached. Each synthetic input starts from a
/// random original and, independently per swap field, takes that field's
/// value list from another random original.
pub fn recombine(examples: &[DataInput], plan: &RecombinationPlan, seed: u64) -> Vec<DataInput> {
    let mut out: Vec<DataInput> = examples.to_vec();
    if examples.is_empty() {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &plan.cluster.to_string()));
    let swap: Vec<String> = if plan.swap_fields.is_empty() {
        examples[0].fields().map(str::to_owned).collect()
    } else {
        plan.swap_fields.iter().cloned().collect()
    };
    let mut serial = 0;
    while out.len() < plan.target_count {
        let base = &examples[rng.gen_range(0..examples.len())];
        let mut synthetic = base.clone().with_id(format!("{}~r{serial}", base.id()));
        serial += 1;
        for field in &swap {
            let donor = &examples[rng.gen_range(0..examples.len())];
            if let (true, Some(values)) = (synthetic.has_field(field), donor.values(field)) {
                synthetic
                    .set_field(field.clone(), values.to_vec())
                    .expect("donor values are valid");
            }
        }
        out.push(synthetic);
    }
    out
}

/// Generates with the backend for every input, delexicalizes, and removes
/// exact duplicates (first occurrence wins).
pub fn extract_initial<M: LanguageModel + ?Sized>(
    examples: &[DataInput],
    cluster: &ClusterKey,
    backend: &M,
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<Template>> {
    let generated: Vec<Option<Template>> = examples
        .par_iter()
        .map(|d| {
            let x = backend.beam_generate(&Context::ltr(d), beam_size, max_len)?;
            if x.is_empty() {
                return Ok(None);
            }
            Ok(Some(delexicalize(&x, d)?.with_source(d.id(), cluster.clone())))
        })
        .collect::<Result<_>>()?;
    let mut seen = HashSet::new();
    Ok(generated
        .into_iter()
        .flatten()
        .filter(|t| seen.insert(t.tokens().to_vec()))
        .collect())
}
