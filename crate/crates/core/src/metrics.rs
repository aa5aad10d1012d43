//! Summary evaluation: ROUGE-L and findings-JSD.
//!
//! findings-JSD runs a two-stage pipeline over each summary. A punchline
//! selector picks the sentence most likely to state the main finding, a
//! direction classifier turns that sentence into a distribution over
//! {significant difference, no significant difference}, and the metric is
//! the base-2 Jensen-Shannon divergence between the distributions inferred
//! for the generated and the reference summary. Both stages are
//! [`LinearTextClassifier`]s: logistic regression over hashed unigram and
//! bigram counts, trained with seeded SGD.

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing::StableHasher;
use crate::textproc::{split_sentences, tokenize, Sentence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("empty text")]
    EmptyText,
    #[error("training set needs both labels; only {0:?} present")]
    SingleLabel(String),
    #[error("unknown label {label:?} for {space} classifier")]
    UnknownLabel { label: String, space: LabelSpace },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("classifier has label space {found}, expected {expected}")]
    WrongLabelSpace { expected: LabelSpace, found: LabelSpace },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// ROUGE-L

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub lcs_len: usize,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore { precision: 0.0, recall: 0.0, f: 0.0, lcs_len: 0 };
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn lowercase_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text.to_lowercase()).collect()
}

/// ROUGE-L over whole summaries, F1 (beta = 1).
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    rouge_l_beta(candidate, reference, 1.0)
}

pub fn rouge_l_beta(candidate: &str, reference: &str, beta: f64) -> RougeScore {
    rouge_l_tokens(&lowercase_tokens(candidate), &lowercase_tokens(reference), beta)
}

pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> RougeScore {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_len(candidate, reference);
    let precision = lcs as f64 / candidate.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    let denom = recall + b2 * precision;
    let f = if denom > 0.0 { (1.0 + b2) * precision * recall / denom } else { 0.0 };
    RougeScore { precision, recall, f, lcs_len: lcs }
}

// ---------------------------------------------------------------------------
// Jensen-Shannon divergence

/// Probabilities of {significant difference, no significant difference}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindingsDistribution {
    pub p_sig: f64,
    pub p_nosig: f64,
}

impl FindingsDistribution {
    pub const UNIFORM: FindingsDistribution = FindingsDistribution { p_sig: 0.5, p_nosig: 0.5 };

    pub fn new(p_sig: f64, p_nosig: f64) -> Result<Self, MetricsError> {
        if !(p_sig.is_finite() && p_nosig.is_finite()) || p_sig < 0.0 || p_nosig < 0.0 {
            return Err(MetricsError::InvalidDistribution(format!("({p_sig}, {p_nosig}) has a negative entry")));
        }
        if (p_sig + p_nosig - 1.0).abs() > 1e-9 {
            return Err(MetricsError::InvalidDistribution(format!("({p_sig}, {p_nosig}) does not sum to 1")));
        }
        Ok(FindingsDistribution { p_sig, p_nosig })
    }

    pub fn from_p_sig(p_sig: f64) -> Result<Self, MetricsError> {
        Self::new(p_sig, 1.0 - p_sig)
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.p_sig, self.p_nosig]
    }
}

/// Base-2 Jensen-Shannon divergence, in [0, 1].
pub fn jsd(p: &FindingsDistribution, q: &FindingsDistribution) -> f64 {
    jsd_slices(&p.as_array(), &q.as_array())
}

/// JSD for arbitrary discrete distributions of equal length.
pub fn jsd_slices(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must have equal support");
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        // 0 * log(0 / m) = 0
        if a > 0.0 {
            total += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).log2();
        }
    }
    total.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Hashed-feature logistic regression

pub const FEATURE_DIMENSION: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSpace {
    /// punchline vs not_punchline
    Punchline,
    /// sig_diff vs no_sig_diff
    Direction,
}

impl LabelSpace {
    pub fn labels(self) -> (&'static str, &'static str) {
        match self {
            LabelSpace::Punchline => ("punchline", "not_punchline"),
            LabelSpace::Direction => ("sig_diff", "no_sig_diff"),
        }
    }

    /// `true` for the positive label.
    pub fn parse_label(self, label: &str) -> Result<bool, MetricsError> {
        let (pos, neg) = self.labels();
        match label {
            l if l == pos => Ok(true),
            l if l == neg => Ok(false),
            _ => Err(MetricsError::UnknownLabel { label: label.to_string(), space: self }),
        }
    }
}

impl std::fmt::Display for LabelSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LabelSpace::Punchline => "punchline",
            LabelSpace::Direction => "direction",
        })
    }
}

impl std::str::FromStr for LabelSpace {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "punchline" => Ok(LabelSpace::Punchline),
            "direction" => Ok(LabelSpace::Direction),
            other => Err(format!("unknown label space {other:?} (expected punchline or direction)")),
        }
    }
}

/// Sparse feature vector: sorted, de-duplicated (index, count) pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseFeatures(pub Vec<(u32, f64)>);

impl SparseFeatures {
    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().map(|&(i, v)| weights[i as usize] * v).sum()
    }
}

/// Hashed lowercase unigram and bigram counts.
pub fn featurize(text: &str, hash_seed: u64, dimension: usize) -> SparseFeatures {
    let tokens = lowercase_tokens(text);
    let mut idx: Vec<u32> = Vec::with_capacity(2 * tokens.len());
    let bucket = |h: u64| (h % dimension as u64) as u32;
    for (i, tok) in tokens.iter().enumerate() {
        let mut h = StableHasher::new(hash_seed);
        h.write(b"u").write_str(tok);
        idx.push(bucket(h.finish()));
        if i + 1 < tokens.len() {
            let mut h = StableHasher::new(hash_seed);
            h.write(b"b").write_str(tok).write_str(&tokens[i + 1]);
            idx.push(bucket(h.finish()));
        }
    }
    idx.sort_unstable();
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(idx.len());
    for i in idx {
        match out.last_mut() {
            Some((j, c)) if *j == i => *c += 1.0,
            _ => out.push((i, 1.0)),
        }
    }
    SparseFeatures(out)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainingHyper {
    fn default() -> Self {
        TrainingHyper { epochs: 30, learning_rate: 0.2, l2: 1e-4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTextClassifier {
    pub label_space: LabelSpace,
    pub hash_seed: u64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Anything that scores a text with the probability of its positive label.
pub trait TextClassifier: Send + Sync {
    fn label_space(&self) -> LabelSpace;
    fn probability(&self, text: &str) -> f64;
}

impl TextClassifier for LinearTextClassifier {
    fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    fn probability(&self, text: &str) -> f64 {
        sigmoid(self.logit(text))
    }
}

impl LinearTextClassifier {
    pub fn zeros(label_space: LabelSpace, hash_seed: u64) -> Self {
        LinearTextClassifier { label_space, hash_seed, weights: vec![0.0; FEATURE_DIMENSION], bias: 0.0 }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len()
    }

    pub fn features(&self, text: &str) -> SparseFeatures {
        featurize(text, self.hash_seed, self.dimension())
    }

    pub fn logit(&self, text: &str) -> f64 {
        self.features(text).dot(&self.weights) + self.bias
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MetricsError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            label_space: self.label_space,
            hash_seed: self.hash_seed,
            dimension: self.dimension(),
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| MetricsError::ModelFile(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(MetricsError::ModelFile(format!("unsupported format_version {}", file.format_version)));
        }
        if file.dimension == 0 {
            return Err(MetricsError::ModelFile("dimension must be positive".into()));
        }
        let mut weights = vec![0.0; file.dimension];
        for (i, w) in file.weights {
            let slot = weights
                .get_mut(i as usize)
                .ok_or_else(|| MetricsError::ModelFile(format!("weight index {i} outside dimension")))?;
            if !w.is_finite() {
                return Err(MetricsError::ModelFile(format!("weight {i} is not finite")));
            }
            *slot = w;
        }
        if !file.bias.is_finite() {
            return Err(MetricsError::ModelFile("bias is not finite".into()));
        }
        Ok(LinearTextClassifier { label_space: file.label_space, hash_seed: file.hash_seed, weights, bias: file.bias })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    label_space: LabelSpace,
    hash_seed: u64,
    dimension: usize,
    bias: f64,
    /// Non-zero weights as (index, value).
    weights: Vec<(u32, f64)>,
}

/// Mean logistic loss plus `l2 / 2 * ||w||^2` (bias unpenalized).
pub fn objective(weights: &[f64], bias: f64, data: &[SparseFeatures], labels: &[bool], l2: f64) -> f64 {
    let n = data.len() as f64;
    let loss: f64 = data
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = x.dot(weights) + bias;
            // -log sigmoid(z) for y = 1, -log(1 - sigmoid(z)) for y = 0
            if y {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`objective`] as (dense weight gradient, bias gradient).
pub fn gradient(weights: &[f64], bias: f64, data: &[SparseFeatures], labels: &[bool], l2: f64) -> (Vec<f64>, f64) {
    let n = data.len() as f64;
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    let mut grad_b = 0.0;
    for (x, &y) in data.iter().zip(labels) {
        let residual = (sigmoid(x.dot(weights) + bias) - if y { 1.0 } else { 0.0 }) / n;
        for &(i, v) in &x.0 {
            grad[i as usize] += residual * v;
        }
        grad_b += residual;
    }
    (grad, grad_b)
}

/// Trains a classifier with seeded SGD on the L2-regularized logistic loss.
///
/// Weights are kept as `scale * v` so the per-step L2 shrinkage costs O(1)
/// instead of a pass over all 2^18 weights.
pub fn train_classifier(
    examples: &[(String, bool)],
    label_space: LabelSpace,
    hyper: &TrainingHyper,
) -> Result<LinearTextClassifier, MetricsError> {
    if !(hyper.learning_rate > 0.0 && hyper.learning_rate.is_finite()) {
        return Err(MetricsError::InvalidHyper(format!("learning_rate {} must be positive", hyper.learning_rate)));
    }
    if !(hyper.l2 >= 0.0 && hyper.learning_rate * hyper.l2 < 1.0) {
        return Err(MetricsError::InvalidHyper(format!("l2 {} must be >= 0 with learning_rate * l2 < 1", hyper.l2)));
    }
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        let (pos, neg) = label_space.labels();
        let only = if positives == 0 { neg } else { pos };
        return Err(MetricsError::SingleLabel(only.to_string()));
    }
    let hash_seed = hyper.seed;
    let mut model = LinearTextClassifier::zeros(label_space, hash_seed);
    let data: Vec<SparseFeatures> = examples.iter().map(|(t, _)| model.features(t)).collect();

    let mut v = vec![0.0; model.dimension()];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let shrink = 1.0 - hyper.learning_rate * hyper.l2;
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &data[i];
            let z = scale * x.dot(&v) + bias;
            let g = sigmoid(z) - if examples[i].1 { 1.0 } else { 0.0 };
            scale *= shrink;
            let step = hyper.learning_rate * g / scale;
            for &(j, c) in &x.0 {
                v[j as usize] -= step * c;
            }
            bias -= hyper.learning_rate * g;
            if scale < 1e-6 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    model.weights = v.into_iter().map(|w| w * scale).collect();
    model.bias = bias;
    Ok(model)
}

/// Reads line-delimited `{text, label}` records.
pub fn read_training_set(text: &str, label_space: LabelSpace) -> Result<Vec<(String, bool)>, MetricsError> {
    #[derive(Deserialize)]
    struct Record {
        text: String,
        label: String,
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: Record =
                serde_json::from_str(l).map_err(|e| MetricsError::ModelFile(format!("line {}: {e}", i + 1)))?;
            Ok((r.text, label_space.parse_label(&r.label)?))
        })
        .collect()
}

const PUNCHLINE_DATA: &str = include_str!("../data/train_punchline.jsonl");
const DIRECTION_DATA: &str = include_str!("../data/train_direction.jsonl");

/// The bundled toy training set for `label_space`.
pub fn bundled_training_set(label_space: LabelSpace) -> Vec<(String, bool)> {
    let text = match label_space {
        LabelSpace::Punchline => PUNCHLINE_DATA,
        LabelSpace::Direction => DIRECTION_DATA,
    };
    read_training_set(text, label_space).expect("bundled training data is valid")
}

/// A classifier trained on the bundled data with default hyperparameters.
pub fn bundled_classifier(label_space: LabelSpace) -> LinearTextClassifier {
    train_classifier(&bundled_training_set(label_space), label_space, &TrainingHyper::default())
        .expect("bundled training data has both labels")
}

// ---------------------------------------------------------------------------
// findings-JSD

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PunchlineSelection {
    pub sentence: Sentence,
    pub probability: f64,
    /// The argmax sentence scored below 0.5.
    pub low_confidence: bool,
}

/// Highest-scoring sentence of `summary`; ties go to the earliest.
pub fn select_punchline(summary: &str, selector: &dyn TextClassifier) -> Result<PunchlineSelection, MetricsError> {
    let mut best: Option<(Sentence, f64)> = None;
    for sentence in split_sentences(summary) {
        let p = selector.probability(&sentence.text);
        if best.as_ref().is_none_or(|(_, bp)| p > *bp) {
            best = Some((sentence, p));
        }
    }
    let (sentence, probability) = best.ok_or(MetricsError::EmptyText)?;
    Ok(PunchlineSelection { sentence, probability, low_confidence: probability < 0.5 })
}

pub fn predict_direction(sentence: &str, clf: &dyn TextClassifier) -> FindingsDistribution {
    let p = clf.probability(sentence);
    FindingsDistribution { p_sig: p, p_nosig: 1.0 - p }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingsJsd {
    pub value: f64,
    pub generated: PunchlineSelection,
    pub reference: PunchlineSelection,
    pub generated_direction: FindingsDistribution,
    pub reference_direction: FindingsDistribution,
}

pub fn findings_jsd(
    generated: &str,
    reference: &str,
    selector: &dyn TextClassifier,
    direction: &dyn TextClassifier,
) -> Result<FindingsJsd, MetricsError> {
    check_space(selector, LabelSpace::Punchline)?;
    check_space(direction, LabelSpace::Direction)?;
    let gen_sel = select_punchline(generated, selector)?;
    let ref_sel = select_punchline(reference, selector)?;
    let gen_dir = predict_direction(&gen_sel.sentence.text, direction);
    let ref_dir = predict_direction(&ref_sel.sentence.text, direction);
    Ok(FindingsJsd {
        value: jsd(&gen_dir, &ref_dir),
        generated: gen_sel,
        reference: ref_sel,
        generated_direction: gen_dir,
        reference_direction: ref_dir,
    })
}

fn check_space(clf: &dyn TextClassifier, expected: LabelSpace) -> Result<(), MetricsError> {
    let found = clf.label_space();
    if found == expected {
        Ok(())
    } else {
        Err(MetricsError::WrongLabelSpace { expected, found })
    }
}
