use thiserror::Error;

use crate::model::ClusterKey;

/// Errors produced by the templm toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data input `{id}`: {reason}")]
    InvalidInput { id: String, reason: String },

    #[error("malformed template `{text}`: {reason}")]
    MalformedTemplate { text: String, reason: String },

    #[error("template references field `{0}` which is absent from the input")]
    MissingField(String),

    #[error("value index {index} out of range for field `{field}` ({len} values)")]
    IndexOutOfRange { field: String, index: usize, len: usize },

    #[error("language model backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend does not support {0} mode")]
    UnknownMode(&'static str),

    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,

    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),

    #[error("no usable template for cluster {0}")]
    NoTemplateForCluster(ClusterKey),

    #[error("output token {position} (`{token}`) is neither a template terminal nor an input value")]
    ProvenanceViolation { position: usize, token: String },

    #[error("malformed corpus line {line}: {reason}")]
    MalformedCorpus { line: usize, reason: String },

    #[error("unsupported file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Variant name, for messages that must be matched by scripts.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput { .. } => "InvalidInput",
            Error::MalformedTemplate { .. } => "MalformedTemplate",
            Error::MissingField(_) => "MissingField",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::BackendUnavailable(_) => "BackendUnavailable",
            Error::UnknownMode(_) => "UnknownMode",
            Error::EmptyCorpus => "EmptyCorpus",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NoTemplateForCluster(_) => "NoTemplateForCluster",
            Error::ProvenanceViolation { .. } => "ProvenanceViolation",
            Error::MalformedCorpus { .. } => "MalformedCorpus",
            Error::UnsupportedVersion { .. } => "UnsupportedVersion",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
