//! Review bundles: the data model, line-delimited JSON ingestion and
//! seeded train/dev/test splitting.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One synthesis task: the trials that a systematic review included and
/// the review's conclusions as the target summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    #[serde(default)]
    pub topic_title: String,
    pub target_summary: String,
    pub studies: Vec<StudyDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDocument {
    pub study_id: String,
    #[serde(default)]
    pub title: String,
    /// Serialized as `abstract`.
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    /// Number of participants, when curated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<u32>,
    /// Probability that the study is at overall low risk of bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rob_low_prob: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate review_id {review_id:?} (first seen on line {first_line})")]
    DuplicateReview { review_id: String, line: usize, first_line: usize },
    #[error("line {line}: review {review_id:?}: {message}")]
    InvalidReview { line: usize, review_id: String, message: String },
    #[error("line {line}: review {review_id:?}, study {study_id:?}: {message}")]
    InvalidStudy { line: usize, review_id: String, study_id: String, message: String },
    #[error("invalid split specification: {0}")]
    InvalidSplit(String),
}

impl Review {
    fn validate(&self, line: usize) -> Result<(), CorpusError> {
        let invalid = |message: &str| CorpusError::InvalidReview {
            line,
            review_id: self.review_id.clone(),
            message: message.to_string(),
        };
        if self.review_id.trim().is_empty() {
            return Err(invalid("review_id is empty"));
        }
        if self.target_summary.trim().is_empty() {
            return Err(invalid("target_summary is empty"));
        }
        if self.studies.is_empty() {
            return Err(invalid("review has zero studies"));
        }
        let mut seen = HashSet::new();
        for study in &self.studies {
            let invalid = |message: String| CorpusError::InvalidStudy {
                line,
                review_id: self.review_id.clone(),
                study_id: study.study_id.clone(),
                message,
            };
            if study.study_id.trim().is_empty() {
                return Err(invalid("study_id is empty".into()));
            }
            if !seen.insert(study.study_id.as_str()) {
                return Err(invalid("duplicate study_id within review".into()));
            }
            if study.title.trim().is_empty() && study.abstract_text.trim().is_empty() {
                return Err(invalid("title and abstract are both empty".into()));
            }
            if study.sample_size == Some(0) {
                return Err(invalid("sample_size must be positive".into()));
            }
            if let Some(p) = study.rob_low_prob {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("rob_low_prob {p} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Parses one review from a JSON line (without validation).
pub fn parse_review(line: &str) -> Result<Review, serde_json::Error> {
    serde_json::from_str(line)
}

pub fn review_to_json(review: &Review) -> String {
    serde_json::to_string(review).expect("review serializes")
}

/// Reads reviews from line-delimited JSON. Blank lines are skipped; line
/// numbers in errors are 1-based.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Review>, CorpusError> {
    let mut reviews = Vec::new();
    let mut first_seen = std::collections::HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let review = parse_review(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        review.validate(line_no)?;
        if let Some(&first_line) = first_seen.get(&review.review_id) {
            return Err(CorpusError::DuplicateReview { review_id: review.review_id, line: line_no, first_line });
        }
        first_seen.insert(review.review_id.clone(), line_no);
        reviews.push(review);
    }
    Ok(reviews)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Review>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    read_corpus(BufReader::new(file))
}

pub fn write_corpus<W: Write>(mut writer: W, reviews: &[Review]) -> io::Result<()> {
    for r in reviews {
        writeln!(writer, "{}", review_to_json(r))?;
    }
    Ok(())
}

/// Train/dev/test fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self, CorpusError> {
        let spec = SplitSpec { fractions: [train, dev, test], seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(CorpusError::InvalidSplit(format!("fractions must be non-negative: {:?}", self.fractions)));
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplit(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// (train, dev, test) sizes for `n` reviews; rounding remainder goes to train.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let dev = ((n as f64) * self.fractions[1]).round() as usize;
        let dev = dev.min(n);
        let test = (((n as f64) * self.fractions[2]).round() as usize).min(n - dev);
        (n - dev - test, dev, test)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Review>,
    pub dev: Vec<Review>,
    pub test: Vec<Review>,
}

/// Partitions `reviews` into three disjoint splits.
///
/// Membership depends only on the set of review ids and `spec`: ids are
/// sorted before the seeded shuffle, so input order does not matter. Each
/// split keeps the input's relative order.
pub fn split_corpus(reviews: &[Review], spec: &SplitSpec) -> Result<Splits, CorpusError> {
    spec.validate()?;
    let (_, n_dev, n_test) = spec.sizes(reviews.len());
    let mut order: Vec<usize> = (0..reviews.len()).collect();
    order.sort_by(|&a, &b| reviews[a].review_id.cmp(&reviews[b].review_id));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    // 0 = train, 1 = dev, 2 = test
    let mut assignment = vec![0u8; reviews.len()];
    for &i in &order[..n_dev] {
        assignment[i] = 1;
    }
    for &i in &order[n_dev..n_dev + n_test] {
        assignment[i] = 2;
    }
    let mut splits = Splits::default();
    for (review, which) in reviews.iter().zip(assignment) {
        match which {
            0 => splits.train.push(review.clone()),
            1 => splits.dev.push(review.clone()),
            _ => splits.test.push(review.clone()),
        }
    }
    Ok(splits)
}

/// The bundled synthetic corpus (14 reviews, 3 to 8 studies each).
pub fn toy_corpus() -> Vec<Review> {
    read_corpus(TOY_CORPUS.as_bytes()).expect("bundled toy corpus is valid")
}

pub const TOY_CORPUS: &str = include_str!("../data/toy_corpus.jsonl");
