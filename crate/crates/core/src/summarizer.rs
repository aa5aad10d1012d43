//! Summary generation backends and the system grid runner.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::corpus::Review;
use crate::input_builder::{assemble, BuildConfig, BuildError, EncoderInput};
use crate::remote::{endpoint, JsonClient, RemoteConfig, RemoteError};
use crate::tagger::TagSet;
use crate::textproc::tokenize;

/// Decoding settings forwarded to the generation service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub beam_size: u32,
    pub min_length: u32,
    pub no_repeat_ngram: u32,
    pub max_length: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams { beam_size: 4, min_length: 65, no_repeat_ngram: 3, max_length: 200 }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), SummarizerError> {
        let fields = [
            ("beam_size", self.beam_size),
            ("min_length", self.min_length),
            ("no_repeat_ngram", self.no_repeat_ngram),
            ("max_length", self.max_length),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(SummarizerError::InvalidParams(format!("{name} must be positive")));
        }
        if self.min_length >= self.max_length {
            return Err(SummarizerError::InvalidParams(format!(
                "min_length {} must be below max_length {}",
                self.min_length, self.max_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedSummary {
    pub review_id: String,
    pub system_id: String,
    pub text: String,
    #[serde(default)]
    pub backend_meta: Map<String, Value>,
}

#[derive(Debug, Error)]
pub enum SummarizerError {
    #[error("invalid decoding params: {0}")]
    InvalidParams(String),
    #[error("summarizer unreachable: {0}")]
    Unreachable(String),
    #[error("summarizer returned HTTP {status} from {url}")]
    Status { url: String, status: u16 },
    #[error("summarizer response undecodable: {0}")]
    Decode(String),
    #[error("empty summary for review {0:?}")]
    EmptySummary(String),
    #[error("duplicate system_id {0:?}")]
    DuplicateSystem(String),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl From<RemoteError> for SummarizerError {
    fn from(e: RemoteError) -> Self {
        match e {
            RemoteError::Unreachable { .. } => SummarizerError::Unreachable(e.to_string()),
            RemoteError::Status { url, status } => SummarizerError::Status { url, status },
            RemoteError::Decode { .. } => SummarizerError::Decode(e.to_string()),
        }
    }
}

pub trait SummaryBackend: Send + Sync {
    fn name(&self) -> &str;
    /// Raw summary text plus backend metadata.
    fn summarize(&self, input: &EncoderInput, params: &DecodingParams)
        -> Result<(String, Map<String, Value>), SummarizerError>;
}

/// Deterministic extractive stand-in for a neural model.
///
/// Picks the `k` highest-scoring punchline sentences of the encoder input
/// (ties to the earlier document, then the earlier sentence), emits them in
/// document order and cuts the result at `max_length` tokens. Without
/// punchlines it falls back to the lead committed sentence of the first
/// `k` documents.
#[derive(Debug, Clone)]
pub struct BaselineBackend {
    pub k: usize,
}

impl Default for BaselineBackend {
    fn default() -> Self {
        BaselineBackend { k: 3 }
    }
}

impl BaselineBackend {
    pub fn extract(&self, input: &EncoderInput, max_tokens: usize) -> String {
        let position: HashMap<&str, usize> =
            input.included.iter().enumerate().map(|(i, s)| (s.study_id.as_str(), i)).collect();
        // (document position, sentence index, text)
        let mut picked: Vec<(usize, usize, &str)> = {
            let mut ranked: Vec<_> = input
                .punchlines
                .iter()
                .map(|p| (p.score, position[p.study_id.as_str()], p.sentence, p.text.as_str()))
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            ranked.into_iter().take(self.k).map(|(_, d, s, t)| (d, s, t)).collect()
        };
        if picked.is_empty() {
            picked = input
                .included
                .iter()
                .enumerate()
                .filter_map(|(d, inc)| Some((d, *inc.sentences.first()?, inc.sentence_texts.first()?.as_str())))
                .take(self.k)
                .collect();
        }
        picked.sort_by_key(|&(d, s, _)| (d, s));
        let joined = picked.iter().map(|(_, _, t)| t.trim()).collect::<Vec<_>>().join(" ");
        truncate_tokens(&joined, max_tokens).to_string()
    }
}

impl SummaryBackend for BaselineBackend {
    fn name(&self) -> &str {
        "baseline"
    }

    fn summarize(
        &self,
        input: &EncoderInput,
        params: &DecodingParams,
    ) -> Result<(String, Map<String, Value>), SummarizerError> {
        let text = self.extract(input, params.max_length as usize);
        let mut meta = Map::new();
        meta.insert("backend".into(), json!("baseline"));
        meta.insert("k".into(), json!(self.k));
        meta.insert("used_punchlines".into(), json!(!input.punchlines.is_empty()));
        Ok((text, meta))
    }
}

/// Prefix of `text` holding at most `max_tokens` tokens.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> &str {
    let tokens = tokenize(text);
    if tokens.len() <= max_tokens {
        return text;
    }
    if max_tokens == 0 {
        return "";
    }
    &text[..tokens[max_tokens - 1].end]
}

#[derive(Serialize)]
struct SummarizeRequest<'a> {
    text: &'a str,
    params: &'a DecodingParams,
}

#[derive(Deserialize)]
struct SummarizeResponse {
    summary: String,
}

/// Client for an HTTP generation service speaking `POST /summarize`.
pub struct RemoteBackend {
    url: String,
    name: String,
    client: JsonClient,
}

impl RemoteBackend {
    pub fn new(base_url: &str, config: RemoteConfig) -> Self {
        RemoteBackend { url: endpoint(base_url, "/summarize"), name: format!("remote:{base_url}"), client: JsonClient::new(config) }
    }
}

impl SummaryBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn summarize(
        &self,
        input: &EncoderInput,
        params: &DecodingParams,
    ) -> Result<(String, Map<String, Value>), SummarizerError> {
        let resp: SummarizeResponse = self.client.post(&self.url, &SummarizeRequest { text: &input.text, params })?;
        let mut meta = Map::new();
        meta.insert("backend".into(), json!("remote"));
        meta.insert("url".into(), json!(self.url));
        Ok((resp.summary, meta))
    }
}

pub fn generate(
    input: &EncoderInput,
    system_id: &str,
    backend: &dyn SummaryBackend,
    params: &DecodingParams,
) -> Result<GeneratedSummary, SummarizerError> {
    params.validate()?;
    let (text, backend_meta) = backend.summarize(input, params)?;
    if text.trim().is_empty() {
        return Err(SummarizerError::EmptySummary(input.review_id.clone()));
    }
    Ok(GeneratedSummary { review_id: input.review_id.clone(), system_id: system_id.to_string(), text, backend_meta })
}

/// One column of the experiment grid.
#[derive(Clone)]
pub struct SystemConfig {
    pub system_id: String,
    pub build: BuildConfig,
    pub backend: Arc<dyn SummaryBackend>,
    pub params: DecodingParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub review_id: String,
    pub system_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    /// Ordered by review (input order), then system (config order).
    pub summaries: Vec<GeneratedSummary>,
    pub failures: Vec<CellFailure>,
}

/// Generates one summary per (review, system), isolating failures per cell.
///
/// At most `max_in_flight` cells run at once.
pub fn run_systems(
    reviews: &[Review],
    tags: &HashMap<String, Vec<TagSet>>,
    systems: &[SystemConfig],
    max_in_flight: usize,
) -> Result<RunOutput, SummarizerError> {
    let mut seen = HashSet::new();
    for s in systems {
        if !seen.insert(s.system_id.as_str()) {
            return Err(SummarizerError::DuplicateSystem(s.system_id.clone()));
        }
        s.params.validate()?;
        s.build.validate()?;
    }
    let cells: Vec<(usize, usize)> =
        (0..reviews.len()).flat_map(|r| (0..systems.len()).map(move |s| (r, s))).collect();
    let run_cell = |&(r, s): &(usize, usize)| {
        let review = &reviews[r];
        let system = &systems[s];
        let review_tags = tags.get(&review.review_id).map(Vec::as_slice).unwrap_or(&[]);
        assemble(review, &system.build, review_tags)
            .map_err(SummarizerError::from)
            .and_then(|input| generate(&input, &system.system_id, system.backend.as_ref(), &system.params))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(max_in_flight.max(1))
        .build()
        .expect("thread pool builds");
    let results: Vec<Result<GeneratedSummary, SummarizerError>> = pool.install(|| {
        use rayon::prelude::*;
        cells.par_iter().map(run_cell).collect()
    });

    let mut out = RunOutput::default();
    for (&(r, s), result) in cells.iter().zip(results) {
        match result {
            Ok(summary) => out.summaries.push(summary),
            Err(e) => {
                log::warn!("{} / {}: {e}", reviews[r].review_id, systems[s].system_id);
                out.failures.push(CellFailure {
                    review_id: reviews[r].review_id.clone(),
                    system_id: systems[s].system_id.clone(),
                    error: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// The five model variants as system configurations.
///
/// `xsum` stands for the checkpoint fine-tuned from the news-summarization
/// initialization; `pmc` for the one continued-pretrained on biomedical
/// full texts, which every other variant starts from.
pub fn standard_variants(
    base: BuildConfig,
    xsum: Arc<dyn SummaryBackend>,
    pmc: Arc<dyn SummaryBackend>,
    params: DecodingParams,
) -> Vec<SystemConfig> {
    let plain = BuildConfig { decorate: false, sort_by_evidence: false, ..base };
    let variant = |id: &str, decorate: bool, sort: bool, backend: &Arc<dyn SummaryBackend>| SystemConfig {
        system_id: id.to_string(),
        build: BuildConfig { decorate, sort_by_evidence: sort, ..plain },
        backend: Arc::clone(backend),
        params,
    };
    vec![
        variant("xsum", false, false, &xsum),
        variant("pretrain_pmc", false, false, &pmc),
        variant("decorate", true, false, &pmc),
        variant("sort_n_rob", false, true, &pmc),
        variant("decorate_and_sort", true, true, &pmc),
    ]
}
