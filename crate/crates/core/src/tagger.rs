//! Per-study metadata for decoration and sorting: PICO and punchline spans,
//! sample size and risk-of-bias scores.
//!
//! Spans come from a [`SpanProvider`]. Two are bundled: [`LexiconProvider`]
//! (cue phrases from the data files under `data/lexicon/`) and
//! [`RemoteSpanProvider`] (HTTP `POST /tag`). Whatever the provider returns
//! is normalized by [`tag_spans`] before anything downstream sees it.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::StudyDocument;
use crate::remote::{endpoint, JsonClient, RemoteConfig, RemoteError};
use crate::textproc::{split_sentences, SentenceSplitter};

/// Default confidence threshold below which provider spans are discarded.
pub const DEFAULT_MIN_SCORE: f64 = 0.5;

/// Risk-of-bias probability used when neither the corpus nor a provider
/// supplies one.
pub const DEFAULT_ROB: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanKind {
    Population,
    Intervention,
    Outcome,
    Punchline,
}

impl SpanKind {
    pub const ALL: [SpanKind; 4] = [SpanKind::Population, SpanKind::Intervention, SpanKind::Outcome, SpanKind::Punchline];

    /// Short marker name used in decoration tags.
    pub fn marker(self) -> &'static str {
        match self {
            SpanKind::Population => "pop",
            SpanKind::Intervention => "inter",
            SpanKind::Outcome => "out",
            SpanKind::Punchline => "pl",
        }
    }

    pub fn from_marker(marker: &str) -> Option<SpanKind> {
        SpanKind::ALL.into_iter().find(|k| k.marker() == marker)
    }
}

impl fmt::Display for SpanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanKind::Population => "population",
            SpanKind::Intervention => "intervention",
            SpanKind::Outcome => "outcome",
            SpanKind::Punchline => "punchline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedSpan {
    pub kind: SpanKind,
    /// Byte offsets `[start, end)` into the study abstract.
    pub start: usize,
    pub end: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagSet {
    pub study_id: String,
    pub spans: Vec<TaggedSpan>,
    /// Provider risk-of-bias estimate, filled in by the `tag` step so that
    /// sorting does not need to call providers again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rob_low_prob: Option<f64>,
}

impl TagSet {
    pub fn empty(study_id: impl Into<String>) -> Self {
        TagSet { study_id: study_id.into(), spans: Vec::new(), rob_low_prob: None }
    }

    pub fn of_kind(&self, kind: SpanKind) -> impl Iterator<Item = &TaggedSpan> {
        self.spans.iter().filter(move |s| s.kind == kind)
    }
}

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("study {study_id:?} has an empty abstract")]
    EmptyAbstract { study_id: String },
    #[error("study {study_id:?}: invalid span: {message}")]
    InvalidSpan { study_id: String, message: String },
    #[error("study {study_id:?}: risk-of-bias score {value} outside [0, 1]")]
    RobOutOfRange { study_id: String, value: f64 },
    #[error("span provider failed: {0}")]
    Remote(#[from] RemoteError),
}

pub trait SpanProvider: Send + Sync {
    fn spans(&self, doc: &StudyDocument) -> Result<Vec<TaggedSpan>, TaggerError>;
}

pub trait RobProvider: Send + Sync {
    /// Probability that `doc` is at overall low risk of bias.
    fn low_risk_probability(&self, doc: &StudyDocument) -> Result<f64, TaggerError>;
}

/// Runs `provider` on `doc` and normalizes its output: spans are validated
/// against the abstract, spans under `min_score` are dropped, punchline
/// spans are widened to whole sentences and same-kind overlaps are merged.
pub fn tag_spans(doc: &StudyDocument, provider: &dyn SpanProvider, min_score: f64) -> Result<TagSet, TaggerError> {
    if doc.abstract_text.trim().is_empty() {
        return Err(TaggerError::EmptyAbstract { study_id: doc.study_id.clone() });
    }
    let raw = provider.spans(doc)?;
    let spans = normalize_spans(&doc.study_id, &doc.abstract_text, raw, min_score)?;
    Ok(TagSet { study_id: doc.study_id.clone(), spans, rob_low_prob: None })
}

pub fn normalize_spans(
    study_id: &str,
    text: &str,
    raw: Vec<TaggedSpan>,
    min_score: f64,
) -> Result<Vec<TaggedSpan>, TaggerError> {
    let invalid = |message: String| TaggerError::InvalidSpan { study_id: study_id.to_string(), message };
    let mut sentences = None;
    let mut kept = Vec::with_capacity(raw.len());
    for mut span in raw {
        if span.start > span.end || span.end > text.len() {
            return Err(invalid(format!("[{}, {}) outside text of length {}", span.start, span.end, text.len())));
        }
        if !text.is_char_boundary(span.start) || !text.is_char_boundary(span.end) {
            return Err(invalid(format!("[{}, {}) splits a character", span.start, span.end)));
        }
        if !span.score.is_finite() || !(0.0..=1.0).contains(&span.score) {
            return Err(invalid(format!("score {} outside [0, 1]", span.score)));
        }
        if span.start == span.end || span.score < min_score {
            continue;
        }
        if span.kind == SpanKind::Punchline {
            let sents = sentences.get_or_insert_with(|| split_sentences(text));
            let mut overlapping = sents.iter().filter(|s| s.end > span.start && s.start < span.end);
            let Some(first) = overlapping.next() else { continue };
            let last = overlapping.last().unwrap_or(first);
            span.start = first.start;
            span.end = last.end;
        }
        kept.push(span);
    }
    kept.sort_by(|a, b| (a.kind, a.start, a.end).cmp(&(b.kind, b.start, b.end)));
    let mut merged: Vec<TaggedSpan> = Vec::with_capacity(kept.len());
    for span in kept {
        match merged.last_mut() {
            Some(prev) if prev.kind == span.kind && span.start <= prev.end => {
                prev.end = prev.end.max(span.end);
                prev.score = prev.score.max(span.score);
            }
            _ => merged.push(span),
        }
    }
    merged.sort_by(|a, b| a.start.cmp(&b.start).then(b.end.cmp(&a.end)).then(a.kind.cmp(&b.kind)));
    Ok(merged)
}

/// Cue-phrase tagger. Population, intervention and outcome phrases are
/// tagged where they occur; a punchline cue anywhere in a sentence tags
/// that whole sentence. Every span has score 1.0.
#[derive(Debug, Clone)]
pub struct LexiconProvider {
    patterns: Vec<(SpanKind, Regex)>,
    splitter: SentenceSplitter,
}

const BUNDLED_LEXICONS: [(SpanKind, &str); 4] = [
    (SpanKind::Population, include_str!("../data/lexicon/population.txt")),
    (SpanKind::Intervention, include_str!("../data/lexicon/intervention.txt")),
    (SpanKind::Outcome, include_str!("../data/lexicon/outcome.txt")),
    (SpanKind::Punchline, include_str!("../data/lexicon/punchline.txt")),
];

fn lexicon_entries(list: &str) -> Vec<&str> {
    list.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect()
}

fn phrase_regex(entries: &[&str]) -> Option<Regex> {
    if entries.is_empty() {
        return None;
    }
    let mut entries = entries.to_vec();
    // leftmost-first alternation: longer phrases must be tried first
    entries.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    let alternatives: Vec<String> = entries
        .iter()
        .map(|e| {
            let body = e.split_whitespace().map(regex::escape).collect::<Vec<_>>().join(r"\s+");
            let lead = if e.starts_with(|c: char| c.is_alphanumeric()) { r"\b" } else { "" };
            let tail = if e.ends_with(|c: char| c.is_alphanumeric()) { r"\b" } else { "" };
            format!("{lead}{body}{tail}")
        })
        .collect();
    Some(
        RegexBuilder::new(&alternatives.join("|"))
            .case_insensitive(true)
            .build()
            .expect("lexicon phrases are escaped"),
    )
}

impl LexiconProvider {
    pub fn from_lists(lists: &[(SpanKind, &str)]) -> Self {
        let patterns = lists
            .iter()
            .filter_map(|(kind, list)| phrase_regex(&lexicon_entries(list)).map(|re| (*kind, re)))
            .collect();
        LexiconProvider { patterns, splitter: SentenceSplitter::default() }
    }

    pub fn bundled() -> Self {
        Self::from_lists(&BUNDLED_LEXICONS)
    }

    /// Loads `population.txt`, `intervention.txt`, `outcome.txt` and
    /// `punchline.txt` from `dir`; missing files leave that kind untagged.
    pub fn from_dir(dir: impl AsRef<Path>) -> io::Result<Self> {
        let mut owned = Vec::new();
        for kind in SpanKind::ALL {
            let path = dir.as_ref().join(format!("{kind}.txt"));
            match fs::read_to_string(&path) {
                Ok(text) => owned.push((kind, text)),
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(e),
            }
        }
        let borrowed: Vec<(SpanKind, &str)> = owned.iter().map(|(k, t)| (*k, t.as_str())).collect();
        Ok(Self::from_lists(&borrowed))
    }
}

impl SpanProvider for LexiconProvider {
    fn spans(&self, doc: &StudyDocument) -> Result<Vec<TaggedSpan>, TaggerError> {
        let text = &doc.abstract_text;
        let mut spans = Vec::new();
        for (kind, re) in &self.patterns {
            if *kind == SpanKind::Punchline {
                for sent in self.splitter.split(text) {
                    if re.is_match(&sent.text) {
                        spans.push(TaggedSpan { kind: *kind, start: sent.start, end: sent.end, score: 1.0 });
                    }
                }
            } else {
                spans.extend(re.find_iter(text).map(|m| TaggedSpan {
                    kind: *kind,
                    start: m.start(),
                    end: m.end(),
                    score: 1.0,
                }));
            }
        }
        Ok(spans)
    }
}

#[derive(Serialize)]
struct TagRequest<'a> {
    study_id: &'a str,
    title: &'a str,
    #[serde(rename = "abstract")]
    abstract_text: &'a str,
}

#[derive(Deserialize)]
struct TagResponse {
    spans: Vec<TaggedSpan>,
}

/// Client for an external tagging service speaking `POST /tag`.
#[derive(Debug, Clone)]
pub struct RemoteSpanProvider {
    url: String,
    client: JsonClient,
}

impl RemoteSpanProvider {
    pub fn new(base_url: &str, config: RemoteConfig) -> Self {
        RemoteSpanProvider { url: endpoint(base_url, "tag"), client: JsonClient::new(config) }
    }
}

impl SpanProvider for RemoteSpanProvider {
    fn spans(&self, doc: &StudyDocument) -> Result<Vec<TaggedSpan>, TaggerError> {
        let req = TagRequest { study_id: &doc.study_id, title: &doc.title, abstract_text: &doc.abstract_text };
        let resp: TagResponse = self.client.post(&self.url, &req)?;
        Ok(resp.spans)
    }
}

fn sample_size_patterns() -> &'static [Regex] {
    static PATTERNS: OnceLock<Vec<Regex>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            r"(?i)\brandomi[sz]ed\s+(\d{1,3}(?:,\d{3})+|\d+)\b",
            r"(?i)\bn\s*=\s*(\d{1,3}(?:,\d{3})+|\d+)\b",
            r"(?i)\b(\d{1,3}(?:,\d{3})+|\d+)\s+(?:patients|participants|subjects|people|women|men|children|adults|infants)\s+(?:were\s+)?(?:enrolled|randomi[sz]ed|recruited|included)\b",
        ]
        .iter()
        .map(|p| Regex::new(p).expect("static pattern"))
        .collect()
    })
}

/// Sample size of `doc`: the curated field when present, otherwise the
/// earliest match of the bundled enrollment patterns in title + abstract.
pub fn extract_sample_size(doc: &StudyDocument) -> Option<u32> {
    if let Some(n) = doc.sample_size.filter(|&n| n > 0) {
        return Some(n);
    }
    [doc.title.as_str(), doc.abstract_text.as_str()].into_iter().find_map(sample_size_in)
}

fn sample_size_in(text: &str) -> Option<u32> {
    let mut best: Option<(usize, u32)> = None;
    for re in sample_size_patterns() {
        for caps in re.captures_iter(text) {
            let m = caps.get(1).expect("group 1");
            let Ok(n) = m.as_str().replace(',', "").parse::<u32>() else { continue };
            if n == 0 {
                continue;
            }
            let pos = caps.get(0).expect("group 0").start();
            if best.is_none_or(|(p, _)| pos < p) {
                best = Some((pos, n));
            }
            break;
        }
    }
    best.map(|(_, n)| n)
}

/// Low-risk-of-bias probability: curated field, then provider, then 0.5.
pub fn score_rob(doc: &StudyDocument, provider: Option<&dyn RobProvider>) -> Result<f64, TaggerError> {
    if let Some(p) = doc.rob_low_prob {
        return check_rob(&doc.study_id, p);
    }
    match provider {
        Some(provider) => check_rob(&doc.study_id, provider.low_risk_probability(doc)?),
        None => Ok(DEFAULT_ROB),
    }
}

fn check_rob(study_id: &str, value: f64) -> Result<f64, TaggerError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(TaggerError::RobOutOfRange { study_id: study_id.to_string(), value })
    }
}

/// Keyword heuristic over reported design features.
#[derive(Debug, Clone, Copy, Default)]
pub struct CueRobProvider;

impl RobProvider for CueRobProvider {
    fn low_risk_probability(&self, doc: &StudyDocument) -> Result<f64, TaggerError> {
        static CUES: OnceLock<Vec<(Regex, f64)>> = OnceLock::new();
        let cues = CUES.get_or_init(|| {
            [
                (r"(?i)\bdouble[- ]blind", 0.15),
                (r"(?i)\bplacebo\b", 0.1),
                (r"(?i)\brandomi[sz]ed\b", 0.05),
                (r"(?i)\bconcealed\s+allocation|allocation\s+concealment", 0.1),
                (r"(?i)\bopen[- ]label", -0.2),
                (r"(?i)\bpilot\b", -0.1),
                (r"(?i)\bnon-?randomi[sz]ed\b", -0.25),
            ]
            .iter()
            .map(|(p, w)| (Regex::new(p).expect("static pattern"), *w))
            .collect()
        });
        let text = format!("{}\n{}", doc.title, doc.abstract_text);
        let score = cues.iter().filter(|(re, _)| re.is_match(&text)).map(|(_, w)| w).sum::<f64>() + DEFAULT_ROB;
        Ok(score.clamp(0.05, 0.95))
    }
}

/// Tags one study end to end: spans (if the abstract is non-empty) plus
/// the provider risk-of-bias estimate when a provider is configured.
pub fn tag_study(
    doc: &StudyDocument,
    spans: &dyn SpanProvider,
    rob: Option<&dyn RobProvider>,
    min_score: f64,
) -> Result<TagSet, TaggerError> {
    let mut tags = if doc.abstract_text.trim().is_empty() {
        TagSet::empty(doc.study_id.clone())
    } else {
        tag_spans(doc, spans, min_score)?
    };
    if rob.is_some() {
        tags.rob_low_prob = Some(score_rob(doc, rob)?);
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::StubServer;
    use proptest::prelude::*;

    fn doc(abs: &str) -> StudyDocument {
        StudyDocument {
            study_id: "s1".into(),
            title: "A trial".into(),
            abstract_text: abs.into(),
            sample_size: None,
            rob_low_prob: None,
        }
    }

    struct Fixed(Vec<TaggedSpan>);
    impl SpanProvider for Fixed {
        fn spans(&self, _: &StudyDocument) -> Result<Vec<TaggedSpan>, TaggerError> {
            Ok(self.0.clone())
        }
    }

    struct FixedRob(f64);
    impl RobProvider for FixedRob {
        fn low_risk_probability(&self, _: &StudyDocument) -> Result<f64, TaggerError> {
            Ok(self.0)
        }
    }

    fn span(kind: SpanKind, start: usize, end: usize) -> TaggedSpan {
        TaggedSpan { kind, start, end, score: 1.0 }
    }

    #[test]
    fn lexicon_tags_punchline_sentence() {
        let text = "FEV1 improved significantly in the tobramycin group.";
        let tags = tag_spans(&doc(text), &LexiconProvider::bundled(), DEFAULT_MIN_SCORE).unwrap();
        let pl: Vec<_> = tags.of_kind(SpanKind::Punchline).collect();
        assert_eq!(pl.len(), 1);
        assert_eq!((pl[0].start, pl[0].end), (0, text.len()));
        assert_eq!(pl[0].score, 1.0);
        let out: Vec<_> = tags.of_kind(SpanKind::Outcome).map(|s| &text[s.start..s.end]).collect();
        assert_eq!(out, ["FEV1"]);
        let int: Vec<_> = tags.of_kind(SpanKind::Intervention).map(|s| &text[s.start..s.end]).collect();
        assert_eq!(int, ["tobramycin"]);
    }

    #[test]
    fn lexicon_prefers_longest_phrase_and_word_boundaries() {
        let text = "Inhaled tobramycin was given to people with cystic fibrosis. Outpatients were excluded.";
        let tags = tag_spans(&doc(text), &LexiconProvider::bundled(), DEFAULT_MIN_SCORE).unwrap();
        let got: Vec<_> = tags.spans.iter().map(|s| (s.kind, &text[s.start..s.end])).collect();
        assert!(got.contains(&(SpanKind::Intervention, "Inhaled tobramycin")));
        assert!(got.contains(&(SpanKind::Population, "people with cystic fibrosis")));
        assert!(!got.iter().any(|(_, t)| *t == "patients"));
    }

    #[test]
    fn no_cues_no_spans() {
        let tags = tag_spans(&doc("The weather was fine on Tuesday."), &LexiconProvider::bundled(), 0.5).unwrap();
        assert!(tags.spans.is_empty());
    }

    #[test]
    fn empty_abstract_is_rejected() {
        assert!(matches!(
            tag_spans(&doc("  "), &LexiconProvider::bundled(), 0.5),
            Err(TaggerError::EmptyAbstract { .. })
        ));
        let tags = tag_study(&doc(""), &LexiconProvider::bundled(), None, 0.5).unwrap();
        assert!(tags.spans.is_empty());
    }

    #[test]
    fn same_kind_overlaps_merge() {
        let text = "x".repeat(20);
        let p = Fixed(vec![span(SpanKind::Population, 0, 10), span(SpanKind::Population, 5, 15)]);
        let tags = tag_spans(&doc(&text), &p, 0.5).unwrap();
        assert_eq!(tags.spans, vec![span(SpanKind::Population, 0, 15)]);
    }

    #[test]
    fn adjacent_same_kind_merge_cross_kind_kept() {
        let text = "x".repeat(20);
        let p = Fixed(vec![
            span(SpanKind::Population, 0, 4),
            span(SpanKind::Population, 4, 8),
            span(SpanKind::Outcome, 2, 6),
        ]);
        let tags = tag_spans(&doc(&text), &p, 0.5).unwrap();
        assert_eq!(tags.spans, vec![span(SpanKind::Population, 0, 8), span(SpanKind::Outcome, 2, 6)]);
    }

    #[test]
    fn punchline_snaps_to_sentences() {
        let text = "Methods were fine. Pain fell a lot. Done here.";
        let p = Fixed(vec![span(SpanKind::Punchline, 24, 28)]);
        let tags = tag_spans(&doc(text), &p, 0.5).unwrap();
        assert_eq!(&text[tags.spans[0].start..tags.spans[0].end], "Pain fell a lot.");
        let p = Fixed(vec![span(SpanKind::Punchline, 15, 22)]);
        let tags = tag_spans(&doc(text), &p, 0.5).unwrap();
        assert_eq!(&text[tags.spans[0].start..tags.spans[0].end], "Methods were fine. Pain fell a lot.");
    }

    #[test]
    fn low_scores_dropped_bad_spans_rejected() {
        let text = "abcdef";
        let mut low = span(SpanKind::Outcome, 0, 3);
        low.score = 0.2;
        assert!(tag_spans(&doc(text), &Fixed(vec![low]), 0.5).unwrap().spans.is_empty());
        let oob = Fixed(vec![span(SpanKind::Outcome, 2, 9)]);
        assert!(matches!(tag_spans(&doc(text), &oob, 0.5), Err(TaggerError::InvalidSpan { .. })));
        let mut bad = span(SpanKind::Outcome, 0, 1);
        bad.score = 1.5;
        assert!(tag_spans(&doc(text), &Fixed(vec![bad]), 0.5).is_err());
        let split_char = Fixed(vec![span(SpanKind::Outcome, 0, 1)]);
        assert!(tag_spans(&doc("éa"), &split_char, 0.5).is_err());
    }

    #[test]
    fn sample_size_rules() {
        assert_eq!(extract_sample_size(&doc("We randomised 120 patients to drug or placebo.")), Some(120));
        assert_eq!(extract_sample_size(&doc("Overall n = 60 completed.")), Some(60));
        assert_eq!(extract_sample_size(&doc("In all, 1,204 participants were enrolled.")), Some(1204));
        assert_eq!(extract_sample_size(&doc("No enrollment numbers reported.")), None);
        assert_eq!(extract_sample_size(&doc("We randomized 0 people, n = 8.")), Some(8));
        let mut d = doc("n = 60");
        d.sample_size = Some(45);
        assert_eq!(extract_sample_size(&d), Some(45));
    }

    #[test]
    fn sample_size_earliest_match_wins() {
        let d = doc("At baseline n = 30 were screened and we randomized 24 of them.");
        assert_eq!(extract_sample_size(&d), Some(30));
    }

    #[test]
    fn rob_precedence_and_range() {
        let mut d = doc("x");
        assert_eq!(score_rob(&d, None).unwrap(), 0.5);
        assert_eq!(score_rob(&d, Some(&FixedRob(0.3))).unwrap(), 0.3);
        assert!(matches!(score_rob(&d, Some(&FixedRob(1.3))), Err(TaggerError::RobOutOfRange { .. })));
        d.rob_low_prob = Some(0.8);
        assert_eq!(score_rob(&d, Some(&FixedRob(0.3))).unwrap(), 0.8);
    }

    #[test]
    fn cue_rob_heuristic() {
        let blind = doc("A double-blind placebo controlled randomised trial.");
        let open = doc("An open-label pilot study.");
        let p = CueRobProvider;
        assert!(p.low_risk_probability(&blind).unwrap() > p.low_risk_probability(&open).unwrap());
    }

    #[test]
    fn remote_provider_round_trip() {
        let server = StubServer::start(|route, body| {
            assert_eq!(route, "/tag");
            assert_eq!(body["study_id"], "s1");
            assert!(body["abstract"].as_str().unwrap().starts_with("Pain"));
            (200, r#"{"spans":[{"kind":"outcome","start":0,"end":4,"score":0.9},{"kind":"outcome","start":2,"end":6,"score":0.7}]}"#.into())
        });
        let provider = RemoteSpanProvider::new(&server.url(), RemoteConfig::default());
        let tags = tag_spans(&doc("Pain fell."), &provider, 0.5).unwrap();
        assert_eq!(tags.spans, vec![TaggedSpan { kind: SpanKind::Outcome, start: 0, end: 6, score: 0.9 }]);
    }

    #[test]
    fn remote_provider_failure_surfaces() {
        let server = StubServer::start(|_, _| (503, "down".into()));
        let provider = RemoteSpanProvider::new(&server.url(), RemoteConfig { timeout_secs: 5.0, retries: 1 });
        let err = tag_spans(&doc("Pain fell."), &provider, 0.5).unwrap_err();
        assert!(matches!(err, TaggerError::Remote(RemoteError::Status { status: 503, .. })));
        assert_eq!(server.hits(), 2);
    }

    fn abstract_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                "[a-z]{1,7}",
                Just("significantly".to_string()),
                Just("patients".to_string()),
                Just("tobramycin.".to_string()),
                Just("lung function".to_string()),
                Just("n = 12".to_string()),
                Just("Improved.".to_string()),
                Just("vs.".to_string()),
                Just("März".to_string()),
                Just("p < 0.05.".to_string()),
            ],
            1..40,
        )
        .prop_map(|w| w.join(" "))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn lexicon_spans_are_valid(text in abstract_strategy()) {
            static LEXICON: OnceLock<LexiconProvider> = OnceLock::new();
            let lexicon = LEXICON.get_or_init(LexiconProvider::bundled);
            let d = doc(&text);
            let tags = tag_spans(&d, lexicon, 0.5).unwrap();
            for s in &tags.spans {
                let _ = &text[s.start..s.end];
                prop_assert!(s.start < s.end);
            }
            for kind in SpanKind::ALL {
                let v: Vec<_> = tags.of_kind(kind).collect();
                for w in v.windows(2) {
                    prop_assert!(w[0].end < w[1].start);
                }
            }
            // normalization is idempotent
            let again = normalize_spans("s1", &text, tags.spans.clone(), 0.5).unwrap();
            prop_assert_eq!(again, tags.spans);
            if let Some(n) = extract_sample_size(&d) {
                prop_assert!(n > 0);
            }
        }
    }
}
