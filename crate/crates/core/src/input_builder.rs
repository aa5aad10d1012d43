//! Encoder-input construction.
//!
//! Assembly runs in two phases. Every document first contributes its
//! structural frame `<S> <T> {title} <ABS>`; if the frames alone exceed the
//! budget, assembly fails. Abstract sentences then fill the remaining
//! budget, taken alternately from the front and the back of each abstract:
//!
//! * without evidence sorting, documents are visited round-robin in an
//!   order shuffled once per review from `(seed, review_id)`;
//! * with evidence sorting, documents are consumed greedily in
//!   non-increasing [`sort_key`] order, each one exhausted before the next.
//!
//! The first sentence that does not fit is cut at token granularity so the
//! budget is spent exactly, and assembly stops. Committed sentences are laid
//! out in their original order within each document.
//!
//! Decoration is applied afterwards to the assembled text, so markers never
//! count against the budget.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Review, StudyDocument};
use crate::hashing::hash_parts;
use crate::tagger::{extract_sample_size, SpanKind, TagSet, DEFAULT_ROB};
use crate::textproc::{split_sentences, token_count, tokenize, Token};

pub const DOC_START: &str = "<S>";
pub const TITLE_START: &str = "<T>";
pub const ABSTRACT_START: &str = "<ABS>";
const STRUCTURAL: [&str; 3] = [DOC_START, TITLE_START, ABSTRACT_START];

/// Tokens spent on structure per document, excluding the title.
pub const FRAME_TOKENS: usize = STRUCTURAL.len();

pub const DEFAULT_TOKEN_BUDGET: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub token_budget: usize,
    pub seed: u64,
    pub decorate: bool,
    pub sort_by_evidence: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig { token_budget: DEFAULT_TOKEN_BUDGET, seed: 0, decorate: false, sort_by_evidence: false }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<(), BuildError> {
        if self.token_budget < FRAME_TOKENS {
            return Err(BuildError::InvalidConfig(format!(
                "token_budget {} is below the {FRAME_TOKENS}-token frame of a single document",
                self.token_budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("invalid build config: {0}")]
    InvalidConfig(String),
    #[error("review {review_id:?}: titles and structure need {needed} tokens but the budget is {budget}")]
    BudgetTooSmall { review_id: String, needed: usize, budget: usize },
    #[error("invalid decoration span: {0}")]
    InvalidSpan(String),
    #[error("unbalanced decoration: {0}")]
    Unbalanced(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncludedStudy {
    pub study_id: String,
    /// Indices into the abstract's sentence list, ascending.
    pub sentences: Vec<usize>,
    /// Undecorated text of each committed sentence (the last may be cut).
    #[serde(default)]
    pub sentence_texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub study_id: String,
    pub sentence: usize,
    pub tokens_kept: usize,
}

/// A committed sentence that overlaps a punchline span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PunchlineSentence {
    pub study_id: String,
    pub sentence: usize,
    pub score: f64,
    /// Undecorated sentence text as committed (possibly truncated).
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderInput {
    pub review_id: String,
    pub text: String,
    /// Tokens charged against the budget; decoration markers are free.
    pub token_count: usize,
    /// One entry per document, in layout order.
    pub included: Vec<IncludedStudy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Truncation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub punchlines: Vec<PunchlineSentence>,
    /// Study ids in the order phase two consumed them.
    #[serde(default)]
    pub consumption_order: Vec<String>,
}

/// Evidence weight `N * RoB` of a study.
///
/// `N` is [`extract_sample_size`] (1 when absent). `RoB` is the curated
/// probability, then the tag-step provider estimate, then 0.5.
pub fn sort_key(doc: &StudyDocument, tags: Option<&TagSet>) -> f64 {
    let n = extract_sample_size(doc).unwrap_or(1) as f64;
    let rob = doc.rob_low_prob.or_else(|| tags.and_then(|t| t.rob_low_prob)).unwrap_or(DEFAULT_ROB);
    n * rob
}

/// Document indices in non-increasing key order; ties keep input order.
pub fn evidence_order(review: &Review, tags: &HashMap<&str, &TagSet>) -> Vec<usize> {
    let keys: Vec<f64> =
        review.studies.iter().map(|d| sort_key(d, tags.get(d.study_id.as_str()).copied())).collect();
    let mut order: Vec<usize> = (0..review.studies.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    order
}

/// Phase-two document order: `layout` itself when sorting by evidence,
/// otherwise `layout` shuffled from `(seed, review_id)`.
pub fn visiting_order(review: &Review, cfg: &BuildConfig, layout: &[usize]) -> Vec<usize> {
    let mut v = layout.to_vec();
    if !cfg.sort_by_evidence {
        let mut rng = ChaCha8Rng::seed_from_u64(hash_parts(cfg.seed, &[&review.review_id]));
        v.shuffle(&mut rng);
    }
    v
}

struct DocState {
    sentences: Vec<SentenceInfo>,
    front: usize,
    /// One past the next back sentence.
    back: usize,
    take_front: bool,
    committed: Vec<usize>,
}

struct SentenceInfo {
    start: usize,
    end: usize,
    tokens: Vec<Token>,
}

impl DocState {
    fn new(abstract_text: &str) -> Self {
        let sentences: Vec<SentenceInfo> = split_sentences(abstract_text)
            .into_iter()
            .map(|s| SentenceInfo { start: s.start, end: s.end, tokens: tokenize(&s.text) })
            .collect();
        let back = sentences.len();
        DocState { sentences, front: 0, back, take_front: true, committed: Vec::new() }
    }

    fn exhausted(&self) -> bool {
        self.front >= self.back
    }

    fn next_sentence(&mut self) -> Option<usize> {
        if self.exhausted() {
            return None;
        }
        let idx = if self.take_front {
            self.front += 1;
            self.front - 1
        } else {
            self.back -= 1;
            self.back
        };
        self.take_front = !self.take_front;
        Some(idx)
    }
}

pub fn assemble(review: &Review, cfg: &BuildConfig, tags: &[TagSet]) -> Result<EncoderInput, BuildError> {
    cfg.validate()?;
    let tag_index: HashMap<&str, &TagSet> = tags.iter().map(|t| (t.study_id.as_str(), t)).collect();
    let order = if cfg.sort_by_evidence {
        evidence_order(review, &tag_index)
    } else {
        (0..review.studies.len()).collect()
    };

    let titles: Vec<&str> = review.studies.iter().map(|d| d.title.trim()).collect();
    let frame_cost: usize = titles.iter().map(|t| FRAME_TOKENS + token_count(t)).sum();
    if frame_cost > cfg.token_budget {
        return Err(BuildError::BudgetTooSmall {
            review_id: review.review_id.clone(),
            needed: frame_cost,
            budget: cfg.token_budget,
        });
    }

    let mut docs: Vec<DocState> = review.studies.iter().map(|d| DocState::new(&d.abstract_text)).collect();
    let visiting = visiting_order(review, cfg, &order);

    let mut remaining = cfg.token_budget - frame_cost;
    let mut truncated: Option<(usize, usize, usize)> = None;
    let mut consumed = vec![false; docs.len()];
    let mut consumption_order: Vec<String> = Vec::new();
    if remaining > 0 {
        // Each step yields the next document to take a sentence from.
        let mut cursor = 0;
        loop {
            let Some(d) = next_document(&docs, &visiting, &mut cursor, cfg.sort_by_evidence) else { break };
            if !consumed[d] {
                consumed[d] = true;
                consumption_order.push(review.studies[d].study_id.clone());
            }
            let doc = &mut docs[d];
            let s = doc.next_sentence().expect("document not exhausted");
            let cost = doc.sentences[s].tokens.len();
            if cost <= remaining {
                doc.committed.push(s);
                remaining -= cost;
                if remaining == 0 {
                    break;
                }
            } else {
                doc.committed.push(s);
                truncated = Some((d, s, remaining));
                remaining = 0;
                break;
            }
        }
    }

    let mut text = String::new();
    let mut included = Vec::with_capacity(order.len());
    let mut mapped_spans = Vec::new();
    let mut punchlines = Vec::new();
    for &d in &order {
        let study = &review.studies[d];
        let doc = &mut docs[d];
        doc.committed.sort_unstable();
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(DOC_START);
        text.push(' ');
        text.push_str(TITLE_START);
        if !titles[d].is_empty() {
            text.push(' ');
            text.push_str(titles[d]);
        }
        text.push(' ');
        text.push_str(ABSTRACT_START);
        let tagset = tag_index.get(study.study_id.as_str());
        let mut sentence_texts = Vec::with_capacity(doc.committed.len());
        for &s in &doc.committed {
            let info = &doc.sentences[s];
            let kept_end = match truncated {
                // token offsets are relative to the sentence text
                Some((td, ts, keep)) if td == d && ts == s => info.start + info.tokens[keep - 1].end,
                _ => info.end,
            };
            text.push(' ');
            let offset = text.len();
            let piece = &study.abstract_text[info.start..kept_end];
            text.push_str(piece);
            sentence_texts.push(piece.to_string());
            let mut pl_score: Option<f64> = None;
            for span in tagset.map(|t| t.spans.as_slice()).unwrap_or(&[]) {
                let lo = span.start.max(info.start);
                let hi = span.end.min(kept_end);
                if lo >= hi {
                    continue;
                }
                if span.kind == SpanKind::Punchline {
                    pl_score = Some(pl_score.map_or(span.score, |p: f64| p.max(span.score)));
                }
                mapped_spans.push(DecorationSpan {
                    kind: span.kind,
                    start: offset + lo - info.start,
                    end: offset + hi - info.start,
                });
            }
            if let Some(score) = pl_score {
                punchlines.push(PunchlineSentence {
                    study_id: study.study_id.clone(),
                    sentence: s,
                    score,
                    text: piece.to_string(),
                });
            }
        }
        included.push(IncludedStudy {
            study_id: study.study_id.clone(),
            sentences: doc.committed.clone(),
            sentence_texts,
        });
    }

    let token_count = cfg.token_budget - remaining;
    debug_assert_eq!(token_count, crate::textproc::token_count(&text));
    if cfg.decorate {
        text = decorate(&text, &mapped_spans)?;
    }
    Ok(EncoderInput {
        review_id: review.review_id.clone(),
        text,
        token_count,
        included,
        truncated: truncated.map(|(d, s, keep)| Truncation {
            study_id: review.studies[d].study_id.clone(),
            sentence: s,
            tokens_kept: keep,
        }),
        punchlines,
        consumption_order,
    })
}

fn next_document(docs: &[DocState], visiting: &[usize], cursor: &mut usize, greedy: bool) -> Option<usize> {
    if greedy {
        while *cursor < visiting.len() {
            if !docs[visiting[*cursor]].exhausted() {
                return Some(visiting[*cursor]);
            }
            *cursor += 1;
        }
        return None;
    }
    for _ in 0..visiting.len() {
        let d = visiting[*cursor % visiting.len()];
        *cursor += 1;
        if !docs[d].exhausted() {
            return Some(d);
        }
    }
    None
}

/// A span over the assembled text to wrap in decoration markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecorationSpan {
    pub kind: SpanKind,
    pub start: usize,
    pub end: usize,
}

fn open_marker(kind: SpanKind) -> String {
    format!("<{}>", kind.marker())
}

fn close_marker(kind: SpanKind) -> String {
    format!("</{}>", kind.marker())
}

/// Wraps each span in `<kind> ... </kind>` markers.
///
/// An opening marker is followed by one inserted space and a closing marker
/// is preceded by one, which is exactly what [`strip_decoration`] removes.
/// Cross-kind spans may nest; a span that crosses another is split so the
/// output stays well nested. Same-kind spans must not overlap.
pub fn decorate(text: &str, spans: &[DecorationSpan]) -> Result<String, BuildError> {
    for s in spans {
        if s.start >= s.end || s.end > text.len() {
            return Err(BuildError::InvalidSpan(format!(
                "{} [{}, {}) in text of length {}",
                s.kind,
                s.start,
                s.end,
                text.len()
            )));
        }
        if !text.is_char_boundary(s.start) || !text.is_char_boundary(s.end) {
            return Err(BuildError::InvalidSpan(format!("{} [{}, {}) splits a character", s.kind, s.start, s.end)));
        }
    }
    let mut sorted = spans.to_vec();
    sorted.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)).then(a.kind.cmp(&b.kind)));
    for kind in SpanKind::ALL {
        let mut last_end = 0;
        for s in sorted.iter().filter(|s| s.kind == kind) {
            if s.start < last_end {
                return Err(BuildError::InvalidSpan(format!("overlapping {kind} spans at {}", s.start)));
            }
            last_end = s.end;
        }
    }

    let mut positions: Vec<usize> = sorted.iter().flat_map(|s| [s.start, s.end]).collect();
    positions.sort_unstable();
    positions.dedup();

    let mut out = String::with_capacity(text.len() + 16 * spans.len());
    let mut stack: Vec<DecorationSpan> = Vec::new();
    let mut next_open = 0;
    let mut last = 0;
    for p in positions {
        out.push_str(&text[last..p]);
        last = p;
        // close everything at or above the deepest span ending here, then
        // reopen the crossing spans that continue past `p`
        if let Some(depth) = stack.iter().position(|s| s.end <= p) {
            let popped: Vec<DecorationSpan> = stack.drain(depth..).collect();
            for s in popped.iter().rev() {
                out.push(' ');
                out.push_str(&close_marker(s.kind));
            }
            for s in popped.into_iter().filter(|s| s.end > p) {
                out.push_str(&open_marker(s.kind));
                out.push(' ');
                stack.push(s);
            }
        }
        while next_open < sorted.len() && sorted[next_open].start == p {
            let s = sorted[next_open];
            out.push_str(&open_marker(s.kind));
            out.push(' ');
            stack.push(s);
            next_open += 1;
        }
    }
    out.push_str(&text[last..]);
    debug_assert!(stack.is_empty());
    Ok(out)
}

/// Removes decoration and structural markers together with the whitespace
/// they introduced.
pub fn strip_decoration(text: &str) -> Result<String, BuildError> {
    let mut out = String::with_capacity(text.len());
    let mut open: Vec<SpanKind> = Vec::new();
    let mut rest = text;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        rest = &rest[lt..];
        match parse_marker(rest) {
            Some((Marker::Open(kind), len)) => {
                if open.contains(&kind) {
                    return Err(BuildError::Unbalanced(format!("nested <{}>", kind.marker())));
                }
                open.push(kind);
                rest = &rest[len..];
                rest = rest.strip_prefix(' ').unwrap_or(rest);
            }
            Some((Marker::Close(kind), len)) => {
                let Some(pos) = open.iter().rposition(|k| *k == kind) else {
                    return Err(BuildError::Unbalanced(format!("</{}> without opening marker", kind.marker())));
                };
                open.remove(pos);
                if out.ends_with(' ') {
                    out.pop();
                }
                rest = &rest[len..];
            }
            Some((Marker::Structural, len)) => {
                rest = &rest[len..];
                match rest.strip_prefix(' ') {
                    Some(r) => rest = r,
                    None => {
                        if out.ends_with(' ') {
                            out.pop();
                        }
                    }
                }
            }
            None => {
                out.push('<');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    if let Some(kind) = open.first() {
        return Err(BuildError::Unbalanced(format!("<{}> is never closed", kind.marker())));
    }
    Ok(out)
}

enum Marker {
    Open(SpanKind),
    Close(SpanKind),
    Structural,
}

fn parse_marker(s: &str) -> Option<(Marker, usize)> {
    for m in STRUCTURAL {
        if s.starts_with(m) {
            return Some((Marker::Structural, m.len()));
        }
    }
    let end = s.find('>')?;
    let inner = &s[1..end];
    let (closing, name) = match inner.strip_prefix('/') {
        Some(name) => (true, name),
        None => (false, inner),
    };
    let kind = SpanKind::from_marker(name)?;
    Some((if closing { Marker::Close(kind) } else { Marker::Open(kind) }, end + 1))
}
