use std::fs;
use std::path::Path;

use evsynth::input_builder::BuildConfig;
use evsynth::remote::RemoteConfig;
use evsynth::summarizer::DecodingParams;
use evsynth::tagger::DEFAULT_MIN_SCORE;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaggerKind {
    Lexicon,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Generation service for every variant except `xsum`.
    pub url: Option<String>,
    /// Generation service for the `xsum` variant; defaults to `url`.
    pub xsum_url: Option<String>,
}

impl Default for BackendSection {
    fn default() -> Self {
        BackendSection { kind: BackendKind::Baseline, url: None, xsum_url: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerSection {
    pub kind: TaggerKind,
    pub url: Option<String>,
    pub min_score: f64,
    /// Estimate risk of bias from abstract wording when the corpus has none.
    pub rob_cues: bool,
}

impl Default for TaggerSection {
    fn default() -> Self {
        TaggerSection { kind: TaggerKind::Lexicon, url: None, min_score: DEFAULT_MIN_SCORE, rob_cues: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSection {
    pub fractions: [f64; 3],
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { fractions: [0.8, 0.1, 0.1] }
    }
}

/// Everything a run depends on besides its input files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub build: BuildConfig,
    pub decoding: DecodingParams,
    pub backend: BackendSection,
    pub tagger: TaggerSection,
    pub remote: RemoteConfig,
    pub split: SplitSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1)
    }
}
