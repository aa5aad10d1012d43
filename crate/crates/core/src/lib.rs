//! Building blocks for multi-document narrative evidence synthesis.
//!
//! The crate covers the whole offline pipeline: loading review bundles
//! ([`corpus`]), tokenization and sentence segmentation ([`textproc`]),
//! span tagging plus sample-size and risk-of-bias extraction ([`tagger`]),
//! budgeted encoder-input construction ([`input_builder`]), summarizer
//! backends ([`summarizer`]), ROUGE-L and findings-JSD ([`metrics`]) and the
//! statistics used to analyse human judgments ([`stats`]).

pub mod corpus;
pub mod input_builder;
pub mod remote;
pub mod metrics;
pub mod stats;
pub mod summarizer;
pub mod tagger;
pub mod textproc;

pub mod hashing;

pub use corpus::{load_corpus, split_corpus, Review, SplitSpec, Splits, StudyDocument};
pub use input_builder::{assemble, decorate, sort_key, strip_decoration, BuildConfig, EncoderInput};
pub use metrics::{findings_jsd, jsd, rouge_l, FindingsDistribution, LinearTextClassifier, RougeScore};
pub use summarizer::{generate, run_systems, DecodingParams, GeneratedSummary};
pub use tagger::{extract_sample_size, score_rob, tag_spans, SpanKind, TagSet, TaggedSpan};
pub use textproc::{split_sentences, tokenize, Sentence, Token};

#[cfg(test)]
mod test_support;
