//! HTTP client for an external language model served over the bridge
//! protocol.
//!
//! | endpoint         | body                    | response                  |
//! |------------------|-------------------------|---------------------------|
//! | `POST /score`    | [`ScoreRequest`]        | [`ScoreResponse`]         |
//! | `POST /generate` | [`GenerateRequest`]     | [`GenerateResponse`]      |
//! | `GET /health`    | -                       | [`HealthResponse`]        |
//!
//! Tokens on the wire are whitespace words. A score response lists the
//! `top_n` most likely words plus `__end__` and a `__rest__` entry carrying
//! the mass of every unlisted word.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Context, LanguageModel, Mode, TokenDistribution, END, REST};
use crate::error::{Error, Result};
use crate::model::DataInput;

/// Environment variable overriding the bridge URL.
pub const BRIDGE_URL_ENV: &str = "TEMPLM_BRIDGE_URL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireMode {
    Ltr,
    Infill,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub mode: WireMode,
    pub data: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub prefix: Vec<String>,
    #[serde(default)]
    pub infill_left: Vec<String>,
    #[serde(default)]
    pub infill_right: Vec<String>,
    pub top_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    /// `(token, log-probability)` pairs including `__end__` and `__rest__`.
    pub distribution: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub data: BTreeMap<String, Vec<String>>,
    pub k: usize,
    pub max_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub version: String,
    pub model: String,
    pub vocab_size: usize,
    /// Optional full word list; enables terminal search over the whole
    /// vocabulary instead of the listed top-n words.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
}

impl ScoreRequest {
    pub fn new(ctx: &Context<'_>, prefix: &[String], top_n: usize) -> Self {
        let (mode, left, right) = match ctx.mode {
            Mode::LeftToRight => (WireMode::Ltr, Vec::new(), Vec::new()),
            Mode::Infill { left, right } => (WireMode::Infill, left.to_vec(), right.to_vec()),
        };
        ScoreRequest {
            mode,
            data: ctx.data.entries().clone(),
            prefix: prefix.to_vec(),
            infill_left: left,
            infill_right: right,
            top_n,
        }
    }
}

impl ScoreResponse {
    /// Converts to a distribution given the backend vocabulary size; an
    /// unlisted word receives an equal share of `__rest__`.
    pub fn into_distribution(self, vocab_size: usize) -> TokenDistribution {
        let entries: BTreeMap<String, f64> = self.distribution.into_iter().collect();
        let listed = entries.keys().filter(|k| !super::is_reserved(k)).count();
        let fallback = match entries.get(REST) {
            Some(rest) => rest - (vocab_size.saturating_sub(listed).max(1) as f64).ln(),
            None => f64::NEG_INFINITY,
        };
        TokenDistribution::new(entries, fallback)
    }
}

/// A backend reached over HTTP. The underlying agent is shareable and
/// allows concurrent in-flight requests.
#[derive(Clone, Debug)]
pub struct RemoteModel {
    base: String,
    agent: ureq::Agent,
    top_n: usize,
    health: HealthResponse,
}

impl RemoteModel {
    /// Connects to `url` (overridden by `TEMPLM_BRIDGE_URL` when set) and
    /// checks `/health`.
    pub fn connect(url: &str) -> Result<Self> {
        let url = std::env::var(BRIDGE_URL_ENV).unwrap_or_else(|_| url.to_owned());
        RemoteModel::connect_exact(&url)
    }

    /// Connects without consulting the environment.
    pub fn connect_exact(url: &str) -> Result<Self> {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        let base = url.trim_end_matches('/').to_owned();
        let health: HealthResponse = agent
            .get(&format!("{base}/health"))
            .call()
            .map_err(unavailable)?
            .into_json()
            .map_err(|e| Error::BackendUnavailable(format!("bad /health response: {e}")))?;
        if health.vocab_size == 0 {
            return Err(Error::BackendUnavailable("bridge reports an empty vocabulary".into()));
        }
        let top_n = health.vocab_size;
        Ok(RemoteModel {
            base,
            agent,
            top_n,
            health,
        })
    }

    /// Limits how many words each score response lists.
    pub fn with_top_n(mut self, top_n: usize) -> Self {
        self.top_n = top_n.max(1);
        self
    }

    pub fn health(&self) -> &HealthResponse {
        &self.health
    }

    fn post<T: Serialize, R: serde::de::DeserializeOwned>(&self, path: &str, body: &T) -> Result<R> {
        self.agent
            .post(&format!("{}{path}", self.base))
            .send_json(body)
            .map_err(unavailable)?
            .into_json()
            .map_err(|e| Error::BackendUnavailable(format!("bad {path} response: {e}")))
    }
}

fn unavailable(err: ureq::Error) -> Error {
    match err {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            Error::BackendUnavailable(format!("bridge returned {code}: {body}"))
        }
        other => Error::BackendUnavailable(other.to_string()),
    }
}

fn data_entries(d: &DataInput) -> BTreeMap<String, Vec<String>> {
    d.entries().clone()
}

impl LanguageModel for RemoteModel {
    fn vocabulary(&self) -> Vec<String> {
        self.health.vocab.clone().unwrap_or_default()
    }

    fn next_token_logprobs(&self, ctx: &Context<'_>, prefix: &[String]) -> Result<TokenDistribution> {
        let request = ScoreRequest::new(ctx, prefix, self.top_n);
        let response: ScoreResponse = self.post("/score", &request)?;
        if !response.distribution.iter().any(|(t, _)| t == END) {
            return Err(Error::BackendUnavailable("score response lacks __end__".into()));
        }
        Ok(response.into_distribution(self.health.vocab_size))
    }

    fn beam_generate(&self, ctx: &Context<'_>, k: usize, max_len: usize) -> Result<Vec<String>> {
        if !matches!(ctx.mode, Mode::LeftToRight) {
            return Err(Error::UnknownMode("infill generation"));
        }
        let request = GenerateRequest {
            data: data_entries(ctx.data),
            k,
            max_length: max_len,
        };
        let response: GenerateResponse = self.post("/generate", &request)?;
        Ok(response.tokens)
    }
}
