//! The end-to-end steps over in-memory records and template-set files.
//! Each step is deterministic given its inputs, the backend and the seed.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BackendConfig, PipelineConfig};
use crate::error::{Error, Result};
use crate::evaluation::{bleu, faithfulness, rouge_l, FaithfulnessReport, PhraseTable};
use crate::extraction::{derive_seed, extract_initial, recombine, RecombinationPlan};
use crate::inference::{realize_batch, Realization, RealizeOptions};
use crate::io::{write_atomic, Record};
use crate::lm::{LanguageModel, NGramModel, RemoteModel};
use crate::model::{cluster_key, tokenize, ClusterKey, DataInput, TemplateStatus};
use crate::refinement::{refine, ParseProvider, RefineConfig};
use crate::template_set::{ClusterEntry, ScoreSummary, TemplateRecord, TemplateSet};
use crate::validation::validate_cluster;

pub const FORMAT_VERSION: u32 = 1;

/// A template set with the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateSetFile {
    pub version: u32,
    pub config: PipelineConfig,
    pub set: TemplateSet,
}

impl TemplateSetFile {
    pub fn new(config: PipelineConfig, set: TemplateSet) -> Self {
        TemplateSetFile {
            version: FORMAT_VERSION,
            config,
            set,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.version,
                expected: FORMAT_VERSION,
            });
        }
        let mut file: TemplateSetFile = serde_json::from_str(text)?;
        file.set.normalize()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        TemplateSetFile::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Opens the configured backend. A relative n-gram path is resolved
/// against `base`.
pub fn open_backend(config: &BackendConfig, base: &Path) -> Result<Box<dyn LanguageModel>> {
    match config {
        BackendConfig::Ngram { path } => Ok(Box::new(NGramModel::load(base.join(path))?)),
        BackendConfig::Remote { url } => Ok(Box::new(RemoteModel::connect(url)?)),
    }
}

/// Trains the reference backend on the augmented corpus.
pub fn train(records: &[Record], config: &PipelineConfig) -> Result<NGramModel> {
    let pairs: Vec<(DataInput, &str)> = records
        .iter()
        .filter_map(|r| r.text.as_deref().map(|t| (r, t)))
        .map(|(r, t)| Ok((config.augment(&r.data)?, t)))
        .collect::<Result<_>>()?;
    NGramModel::train(pairs.iter().map(|(d, t)| (d, *t)), config.ngram.clone())
}

/// Raw inputs grouped by the cluster of their augmented form, in key order,
/// each cluster in corpus order.
fn group(records: &[Record], config: &PipelineConfig) -> Result<BTreeMap<ClusterKey, Vec<DataInput>>> {
    let policy = config.cluster_policy();
    let mut clusters: BTreeMap<ClusterKey, Vec<DataInput>> = BTreeMap::new();
    let mut ids = HashSet::new();
    for r in records {
        if !ids.insert(r.data.id()) {
            return Err(Error::InvalidInput {
                id: r.data.id().to_owned(),
                reason: "duplicate id".into(),
            });
        }
        let key = cluster_key(&config.augment(&r.data)?, &policy);
        clusters.entry(key).or_default().push(r.data.clone());
    }
    Ok(clusters)
}

/// Clusters, augments and recombines the corpus, then collects candidate
/// templates from the backend's outputs. Template ids are `c<cluster>-<n>`.
pub fn extract<M: LanguageModel + ?Sized>(
    records: &[Record],
    config: &PipelineConfig,
    backend: &M,
) -> Result<TemplateSetFile> {
    config.validate()?;
    let groups = group(records, config)?;
    let clusters: Vec<ClusterEntry> = groups
        .into_iter()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(ci, (key, originals))| {
            let plan = RecombinationPlan::new(key.clone(), config.recombination_target);
            let examples: Vec<DataInput> = recombine(&originals, &plan, derive_seed(config.seed, "recombine"))
                .iter()
                .map(|d| config.augment(d))
                .collect::<Result<_>>()?;
            let templates = extract_initial(
                &examples,
                &key,
                backend,
                config.generate_beam,
                config.generate_max_length,
            )?;
            let mut entry = ClusterEntry::new(key, examples);
            entry.templates = templates
                .into_iter()
                .enumerate()
                .map(|(ti, t)| TemplateRecord::new(t.with_id(format!("c{ci}-{ti}"))))
                .collect();
            Ok(entry)
        })
        .collect::<Result<_>>()?;
    log::info!(
        "extracted {} templates in {} clusters",
        clusters.iter().map(|c| c.templates.len()).sum::<usize>(),
        clusters.len()
    );
    let mut set = TemplateSet::new(config.cluster_policy());
    set.clusters = clusters;
    set.normalize()?;
    Ok(TemplateSetFile::new(config.clone(), set))
}

/// One ranked template in the validation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationLine {
    pub cluster: String,
    pub rank: usize,
    pub id: String,
    pub text: String,
    pub total: f64,
    pub mean: f64,
}

/// Keeps the top-K non-rejected templates of each cluster. Templates without
/// fields are dropped.
pub fn validate<M: LanguageModel + ?Sized>(
    file: &TemplateSetFile,
    backend: &M,
) -> Result<(TemplateSetFile, Vec<ValidationLine>)> {
    let config = &file.config;
    config.validate()?;
    let results: Vec<(ClusterEntry, Vec<ValidationLine>)> = file
        .set
        .clusters
        .par_iter()
        .map(|c| {
            let candidates: Vec<_> = c
                .templates
                .iter()
                .filter(|r| r.status() != TemplateStatus::Rejected)
                // A template without fields says the same thing for every input.
                .filter(|r| r.template.nonterminal_count() > 0)
                .map(|r| r.template.clone())
                .collect();
            let kept = validate_cluster(&candidates, &c.examples, backend, config.top_k(), config.selection)?;
            let mut entry = ClusterEntry::new(c.key.clone(), c.examples.clone());
            let mut lines = Vec::new();
            for (rank, (t, score)) in kept.into_iter().enumerate() {
                lines.push(ValidationLine {
                    cluster: c.key.to_string(),
                    rank: rank + 1,
                    id: t.id.clone(),
                    text: t.text(),
                    total: score.total,
                    mean: score.mean,
                });
                let old = c.templates.iter().find(|r| r.id() == t.id);
                entry.templates.push(TemplateRecord {
                    template: t,
                    score: Some(ScoreSummary {
                        total: score.total,
                        mean: score.mean,
                    }),
                    note: old.and_then(|r| r.note.clone()),
                    refined_from: old.and_then(|r| r.refined_from.clone()),
                });
            }
            Ok((entry, lines))
        })
        .collect::<Result<_>>()?;
    let mut out = file.clone();
    let mut report = Vec::new();
    out.set.clusters = results
        .into_iter()
        .map(|(entry, lines)| {
            report.extend(lines);
            entry
        })
        .collect();
    Ok((out, report))
}

/// What refinement did to one template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineLine {
    pub id: String,
    pub before_text: String,
    pub after_text: String,
    pub before: f64,
    pub after: f64,
    pub removed: Vec<(usize, usize)>,
}

/// Refines every validated template. Templates that become identical to an
/// earlier one in the same cluster are dropped.
pub fn refine_set<M: LanguageModel + ?Sized>(
    file: &TemplateSetFile,
    backend: &M,
    parser: &dyn ParseProvider,
) -> Result<(TemplateSetFile, Vec<RefineLine>)> {
    let config = &file.config;
    let rc = RefineConfig {
        threshold: config.threshold,
        beam_size: config.beam_size,
        max_length: config.max_length,
        selection: config.selection,
    };
    let mut out = file.clone();
    let mut report = Vec::new();
    for cluster in &mut out.set.clusters {
        let outcomes: Vec<Option<_>> = cluster
            .templates
            .par_iter()
            .map(|r| {
                if r.status() != TemplateStatus::Validated {
                    return Ok(None);
                }
                refine(&r.template, &cluster.examples, backend, parser, &rc).map(Some)
            })
            .collect::<Result<_>>()?;
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for (mut record, outcome) in cluster.templates.drain(..).zip(outcomes) {
            if let Some(o) = outcome {
                // Refinement that strips every field is not applied.
                let apply = o.changed() && o.template.nonterminal_count() > 0;
                report.push(RefineLine {
                    id: record.id().to_owned(),
                    before_text: record.template.text(),
                    after_text: if apply {
                        o.template.text()
                    } else {
                        record.template.text()
                    },
                    before: o.before,
                    after: if apply { o.after } else { o.before },
                    removed: o.removed.iter().map(|s| (s.start, s.end)).collect(),
                });
                if apply {
                    record.refined_from = Some(record.template.text());
                    record.template = o.template;
                    let n = cluster.examples.len().max(1) as f64;
                    record.score = Some(ScoreSummary {
                        total: o.after,
                        mean: o.after / n,
                    });
                }
            }
            if seen.insert(record.template.tokens().to_vec()) {
                kept.push(record);
            } else {
                log::info!("dropping {}: duplicate after refinement", record.id());
            }
        }
        cluster.templates = kept;
    }
    Ok((out, report))
}

/// One inference result line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Realizes every input with the set's templates after augmenting it like
/// the training data.
pub fn infer<M: LanguageModel + ?Sized>(
    inputs: &[DataInput],
    file: &TemplateSetFile,
    backend: &M,
    fallback: bool,
) -> Result<Vec<Result<Realization>>> {
    let augmented: Vec<DataInput> = inputs.iter().map(|d| file.config.augment(d)).collect::<Result<_>>()?;
    let options = RealizeOptions {
        fallback,
        selection: file.config.selection,
    };
    Ok(realize_batch(&augmented, &file.set, backend, options))
}

pub fn infer_line(d: &DataInput, result: &Result<Realization>) -> InferLine {
    match result {
        Ok(r) => InferLine {
            id: d.id().to_owned(),
            text: Some(r.text.clone()),
            template_id: Some(r.template_id.clone()),
            fallback: r.fallback,
            error: None,
        },
        Err(e) => InferLine {
            id: d.id().to_owned(),
            text: None,
            template_id: None,
            fallback: false,
            error: Some(format!("{}: {e}", e.kind())),
        },
    }
}

/// Corpus-level scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub examples: usize,
    #[serde(rename = "E_precision")]
    pub e_precision: usize,
    #[serde(rename = "E_recall")]
    pub e_recall: usize,
    /// Present when references are available for every output.
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
}

/// Scores `(id, text)` outputs against the raw corpus. Corpus lines sharing
/// an id contribute several references.
pub fn evaluate(
    corpus: &[Record],
    outputs: &[(String, String)],
    table: &PhraseTable,
) -> Result<(FaithfulnessReport, EvalSummary)> {
    let mut by_id: BTreeMap<&str, (&DataInput, Vec<Vec<String>>)> = BTreeMap::new();
    for r in corpus {
        let e = by_id.entry(r.data.id()).or_insert((&r.data, Vec::new()));
        if let Some(t) = &r.text {
            e.1.push(tokenize(t));
        }
    }
    let mut pairs = Vec::new();
    let mut candidates = Vec::new();
    let mut references = Vec::new();
    for (id, text) in outputs {
        let (d, refs) = by_id.get(id.as_str()).ok_or_else(|| Error::InvalidInput {
            id: id.clone(),
            reason: "output for an id that is not in the corpus".into(),
        })?;
        pairs.push((*d, text.as_str()));
        candidates.push(tokenize(text));
        references.push(refs.clone());
    }
    let report = faithfulness(pairs, table);
    let referenced = !references.is_empty() && references.iter().all(|r| !r.is_empty());
    let summary = EvalSummary {
        examples: outputs.len(),
        e_precision: report.e_precision,
        e_recall: report.e_recall,
        bleu: referenced.then(|| bleu(&candidates, &references)).transpose()?,
        rouge_l: referenced.then(|| rouge_l(&candidates, &references)).transpose()?,
    };
    Ok((report, summary))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Approve,
    Reject,
}

/// A review decision: either a bare action or an action with a note.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decision {
    Bare(Action),
    Noted {
        action: Action,
        #[serde(default)]
        note: Option<String>,
    },
}

impl Decision {
    pub fn action(&self) -> Action {
        match self {
            Decision::Bare(a) | Decision::Noted { action: a, .. } => *a,
        }
    }

    pub fn note(&self) -> Option<&str> {
        match self {
            Decision::Bare(_) => None,
            Decision::Noted { note, .. } => note.as_deref(),
        }
    }
}

pub type Decisions = BTreeMap<String, Decision>;

/// Applies review decisions. Unknown ids are returned as warnings.
pub fn review(file: &TemplateSetFile, decisions: &Decisions) -> (TemplateSetFile, Vec<String>) {
    let mut out = file.clone();
    let mut warnings = Vec::new();
    for (id, decision) in decisions {
        let Some(record) = out.set.template_mut(id) else {
            warnings.push(format!("unknown template id `{id}`"));
            continue;
        };
        record.template.status = match decision.action() {
            Action::Approve => TemplateStatus::Approved,
            Action::Reject => TemplateStatus::Rejected,
        };
        if let Some(note) = decision.note() {
            record.note = Some(note.to_owned());
        }
    }
    (out, warnings)
}

/// Templates grouped by cluster with status and scores.
pub fn list_templates(set: &TemplateSet) -> String {
    let mut out = String::new();
    for c in &set.clusters {
        out.push_str(&format!("== {} ({} examples)\n", c.key, c.examples.len()));
        for r in &c.templates {
            let score = r
                .score
                .map_or_else(|| "-".to_owned(), |s| format!("{:.3} (mean {:.3})", s.total, s.mean));
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.id(),
                r.status(),
                score,
                r.template.text()
            ));
            if let Some(note) = &r.note {
                out.push_str(&format!("\tnote: {note}\n"));
            }
        }
    }
    out
}
