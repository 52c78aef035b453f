//! The deployable artifact: templates grouped by cluster, with provenance,
//! scores and review state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClusterKey, ClusterPolicy, DataInput, Template, TemplateStatus};

/// Cluster generalizability of a template.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub total: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateRecord {
    pub template: Template,
    pub score: Option<ScoreSummary>,
    pub note: Option<String>,
    /// Text of the template this one was refined from.
    pub refined_from: Option<String>,
}

impl TemplateRecord {
    pub fn new(template: Template) -> Self {
        TemplateRecord {
            template,
            score: None,
            note: None,
            refined_from: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.template.id
    }

    pub fn status(&self) -> TemplateStatus {
        self.template.status
    }
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    status: TemplateStatus,
    source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<ScoreSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refined_from: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterEntry {
    pub key: ClusterKey,
    /// Inputs the cluster's templates are scored against (originals first,
    /// then recombined ones).
    pub examples: Vec<DataInput>,
    pub templates: Vec<TemplateRecord>,
}

impl ClusterEntry {
    pub fn new(key: ClusterKey, examples: Vec<DataInput>) -> Self {
        ClusterEntry {
            key,
            examples,
            templates: Vec::new(),
        }
    }

    /// Templates inference may use. If any template is approved, only
    /// approved ones are used; otherwise validated and refined ones.
    pub fn usable(&self) -> Vec<&Template> {
        let approved: Vec<&Template> = self
            .templates
            .iter()
            .map(|r| &r.template)
            .filter(|t| t.status == TemplateStatus::Approved)
            .collect();
        if !approved.is_empty() {
            return approved;
        }
        self.templates
            .iter()
            .map(|r| &r.template)
            .filter(|t| t.status.is_deployable())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RawCluster {
    key: ClusterKey,
    examples: Vec<DataInput>,
    templates: Vec<RawRecord>,
}

impl Serialize for ClusterEntry {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawCluster {
            key: self.key.clone(),
            examples: self.examples.clone(),
            templates: self
                .templates
                .iter()
                .map(|r| RawRecord {
                    id: r.template.id.clone(),
                    text: r.template.text(),
                    status: r.template.status,
                    source_id: r.template.source_id.clone(),
                    score: r.score,
                    note: r.note.clone(),
                    refined_from: r.refined_from.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClusterEntry {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCluster::deserialize(deserializer)?;
        let templates = raw
            .templates
            .into_iter()
            .map(|r| {
                let template = Template::parse(&r.text)
                    .map_err(serde::de::Error::custom)?
                    .with_id(r.id)
                    .with_source(r.source_id, raw.key.clone())
                    .with_status(r.status);
                Ok(TemplateRecord {
                    template,
                    score: r.score,
                    note: r.note,
                    refined_from: r.refined_from,
                })
            })
            .collect::<std::result::Result<_, D::Error>>()?;
        Ok(ClusterEntry {
            key: raw.key,
            examples: raw.examples,
            templates,
        })
    }
}

/// Templates of every cluster, ordered by cluster key.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub policy: ClusterPolicy,
    pub clusters: Vec<ClusterEntry>,
}

impl TemplateSet {
    pub fn new(policy: ClusterPolicy) -> Self {
        TemplateSet {
            policy,
            clusters: Vec::new(),
        }
    }

    pub fn cluster(&self, key: &ClusterKey) -> Option<&ClusterEntry> {
        self.clusters.iter().find(|c| &c.key == key)
    }

    pub fn cluster_mut(&mut self, key: &ClusterKey) -> Option<&mut ClusterEntry> {
        self.clusters.iter_mut().find(|c| &c.key == key)
    }

    pub fn templates(&self) -> impl Iterator<Item = &TemplateRecord> {
        self.clusters.iter().flat_map(|c| c.templates.iter())
    }

    pub fn template(&self, id: &str) -> Option<&TemplateRecord> {
        self.templates().find(|r| r.id() == id)
    }

    pub fn template_mut(&mut self, id: &str) -> Option<&mut TemplateRecord> {
        self.clusters
            .iter_mut()
            .flat_map(|c| c.templates.iter_mut())
            .find(|r| r.template.id == id)
    }

    pub fn len(&self) -> usize {
        self.templates().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sorts clusters by key and checks that template ids are unique.
    pub fn normalize(&mut self) -> Result<()> {
        self.clusters.sort_by(|a, b| a.key.cmp(&b.key));
        let mut ids: Vec<&str> = self.templates().map(|r| r.id()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate template id `{}`", w[0])));
        }
        Ok(())
    }
}
