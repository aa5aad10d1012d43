//! Independent step-by-step simulation of encoder-input assembly, plus a
//! random review generator. Shared by the property tests and the
//! acceptance suite.

#![allow(dead_code)]

use evsynth::corpus::{Review, StudyDocument};
use evsynth::input_builder::{assemble, sort_key, strip_decoration, visiting_order, BuildConfig, BuildError};
use evsynth::tagger::{normalize_spans, SpanKind, TagSet, TaggedSpan};
use evsynth::textproc::{split_sentences, token_count};
use rand::Rng;

#[derive(Debug, PartialEq)]
pub struct Simulation {
    /// Committed sentence indices per document, ascending.
    pub committed: Vec<Vec<usize>>,
    /// (document, sentence, tokens kept)
    pub truncated: Option<(usize, usize, usize)>,
    pub total: usize,
    pub consumption: Vec<usize>,
}

/// Replays the selection rule literally: structure and titles first, then
/// one sentence per step from the document the visiting rule names, front
/// and back alternating within a document.
pub fn simulate(
    titles: &[usize],
    sentences: &[Vec<usize>],
    visiting: &[usize],
    greedy: bool,
    budget: usize,
) -> Option<Simulation> {
    let frame: usize = titles.iter().map(|t| 3 + t).sum();
    if frame > budget {
        return None;
    }
    let n = sentences.len();
    let mut used = frame;
    let mut committed = vec![Vec::new(); n];
    let mut taken = vec![0usize; n];
    let mut consumption = Vec::new();
    let mut truncated = None;
    let mut step = 0usize;
    let remaining_docs = |taken: &[usize]| (0..n).filter(|&d| taken[d] < sentences[d].len()).count();
    'outer: while used < budget && remaining_docs(&taken) > 0 {
        let d = if greedy {
            *visiting.iter().find(|&&d| taken[d] < sentences[d].len()).unwrap()
        } else {
            loop {
                let d = visiting[step % visiting.len()];
                step += 1;
                if taken[d] < sentences[d].len() {
                    break d;
                }
            }
        };
        if !consumption.contains(&d) {
            consumption.push(d);
        }
        // k-th pick of a document: front for even k, back for odd k
        let k = taken[d];
        let len = sentences[d].len();
        let s = if k % 2 == 0 { k / 2 } else { len - 1 - k / 2 };
        taken[d] += 1;
        let cost = sentences[d][s];
        committed[d].push(s);
        if used + cost <= budget {
            used += cost;
        } else {
            truncated = Some((d, s, budget - used));
            used = budget;
            break 'outer;
        }
    }
    for c in &mut committed {
        c.sort_unstable();
    }
    Some(Simulation { committed, truncated, total: used, consumption })
}

/// Document order used for the layout: stable descending sort key when
/// sorting, otherwise input order.
pub fn layout_order(review: &Review, tags: &[TagSet], sort: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..review.studies.len()).collect();
    if sort {
        let key = |i: usize| {
            let t = tags.iter().find(|t| t.study_id == review.studies[i].study_id);
            sort_key(&review.studies[i], t)
        };
        // insertion sort keeps equal keys in input order
        for i in 1..idx.len() {
            let mut j = i;
            while j > 0 && key(idx[j - 1]) < key(idx[j]) {
                idx.swap(j - 1, j);
                j -= 1;
            }
        }
    }
    idx
}

const WORDS: &[&str] = &[
    "patients", "trial", "placebo", "improved", "significantly", "reduced", "pain", "no", "difference",
    "groups", "mortality", "adults", "children", "with", "asthma", "the", "was", "outcome", "(p", "<",
    "0.05)", "e.g.", "95%", "CI", "vs.", "FEV1", "score", "dose", "weeks",
];

fn sentence<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(1..9);
    let mut words: Vec<String> = (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string()).collect();
    let mut first = words[0].chars();
    let head = first.next().unwrap().to_uppercase().collect::<String>() + first.as_str();
    words[0] = head;
    if rng.gen_bool(0.2) {
        words.insert(0, format!("We randomised {} participants", rng.gen_range(10..2000)));
    }
    format!("{}.", words.join(" "))
}

/// A random review with 1-6 studies and matching random tag sets.
pub fn random_review<R: Rng>(rng: &mut R, id: usize) -> (Review, Vec<TagSet>) {
    let n_docs = rng.gen_range(1..7);
    let mut studies = Vec::new();
    let mut tags = Vec::new();
    for d in 0..n_docs {
        let title_words = rng.gen_range(0..5);
        let mut title: Vec<&str> = (0..title_words).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        if title.is_empty() {
            title.push("Trial");
        }
        let n_sent = rng.gen_range(0..7);
        let abstract_text: Vec<String> = (0..n_sent).map(|_| sentence(rng)).collect();
        let doc = StudyDocument {
            study_id: format!("s{d}"),
            title: title.join(" "),
            abstract_text: abstract_text.join(" "),
            sample_size: rng.gen_bool(0.3).then(|| rng.gen_range(1..3000)),
            rob_low_prob: rng.gen_bool(0.5).then(|| rng.gen_range(0.0..=1.0)),
        };
        tags.push(random_tags(rng, &doc));
        studies.push(doc);
    }
    let review = Review {
        review_id: format!("FZ{id:05}"),
        topic_title: "fuzz".into(),
        target_summary: "x".into(),
        studies,
    };
    (review, tags)
}

fn random_tags<R: Rng>(rng: &mut R, doc: &StudyDocument) -> TagSet {
    let text = &doc.abstract_text;
    // candidate cut points at word edges
    let mut cuts: Vec<usize> = vec![0, text.len()];
    for (i, c) in text.char_indices() {
        if c == ' ' {
            cuts.push(i);
            cuts.push(i + 1);
        }
    }
    cuts.sort_unstable();
    cuts.dedup();
    let mut raw = Vec::new();
    if !text.is_empty() {
        for kind in SpanKind::ALL {
            for _ in 0..rng.gen_range(0..3) {
                let a = cuts[rng.gen_range(0..cuts.len())];
                let b = cuts[rng.gen_range(0..cuts.len())];
                if a < b {
                    raw.push(TaggedSpan { kind, start: a, end: b, score: rng.gen_range(0.0..=1.0) });
                }
            }
        }
    }
    let spans = normalize_spans(&doc.study_id, text, raw, 0.5).expect("generated spans are valid");
    TagSet { study_id: doc.study_id.clone(), spans, rob_low_prob: rng.gen_bool(0.5).then(|| rng.gen_range(0.0..=1.0)) }
}

/// Checks every assembly invariant for one review and configuration.
pub fn check_review(review: &Review, tags: &[TagSet], cfg: &BuildConfig) -> Result<(), String> {
    let titles: Vec<usize> = review.studies.iter().map(|d| token_count(d.title.trim())).collect();
    let sentences: Vec<Vec<usize>> = review
        .studies
        .iter()
        .map(|d| split_sentences(&d.abstract_text).iter().map(|s| token_count(&s.text)).collect())
        .collect();
    let layout = layout_order(review, tags, cfg.sort_by_evidence);
    let visiting = visiting_order(review, cfg, &layout);
    let sim = simulate(&titles, &sentences, &visiting, cfg.sort_by_evidence, cfg.token_budget);

    let plain_cfg = BuildConfig { decorate: false, ..*cfg };
    let result = assemble(review, &plain_cfg, tags);
    let (sim, plain) = match (sim, result) {
        (None, Err(BuildError::BudgetTooSmall { .. })) => return Ok(()),
        (None, Ok(_)) => return Err("assembled although titles exceed the budget".into()),
        (_, Err(e)) => return Err(format!("unexpected error: {e}")),
        (Some(s), Ok(p)) => (s, p),
    };
    let id = &review.review_id;
    if plain.token_count > cfg.token_budget {
        return Err(format!("{id}: {} tokens over budget {}", plain.token_count, cfg.token_budget));
    }
    if token_count(&plain.text) != plain.token_count {
        return Err(format!("{id}: reported token_count disagrees with the text"));
    }
    if plain.token_count != sim.total {
        return Err(format!("{id}: token_count {} but simulation spent {}", plain.token_count, sim.total));
    }
    let mut cursor = 0;
    for &d in &layout {
        let frame = format!("<S> <T> {} <ABS>", review.studies[d].title.trim()).replace("<T>  <ABS>", "<T> <ABS>");
        match plain.text[cursor..].find(&frame) {
            Some(p) => cursor += p + frame.len(),
            None => return Err(format!("{id}: title frame of {} missing or out of order", review.studies[d].study_id)),
        }
    }
    for (pos, &d) in layout.iter().enumerate() {
        if plain.included[pos].sentences != sim.committed[d] {
            return Err(format!(
                "{id}: document {d} committed {:?}, simulation {:?}",
                plain.included[pos].sentences, sim.committed[d]
            ));
        }
    }
    let trunc = plain.truncated.as_ref().map(|t| {
        let d = review.studies.iter().position(|s| s.study_id == t.study_id).unwrap();
        (d, t.sentence, t.tokens_kept)
    });
    if trunc != sim.truncated {
        return Err(format!("{id}: truncation {trunc:?}, simulation {:?}", sim.truncated));
    }
    if cfg.sort_by_evidence {
        let keys: Vec<f64> = plain
            .consumption_order
            .iter()
            .map(|sid| {
                let doc = review.studies.iter().find(|s| &s.study_id == sid).unwrap();
                sort_key(doc, tags.iter().find(|t| &t.study_id == sid))
            })
            .collect();
        if keys.windows(2).any(|w| w[0] < w[1]) {
            return Err(format!("{id}: consumption keys not non-increasing: {keys:?}"));
        }
    }
    let decorated = assemble(review, &BuildConfig { decorate: true, ..*cfg }, tags).map_err(|e| e.to_string())?;
    if decorated.token_count != plain.token_count {
        return Err(format!("{id}: decoration changed the token count"));
    }
    let a = strip_decoration(&decorated.text).map_err(|e| e.to_string())?;
    let b = strip_decoration(&plain.text).map_err(|e| e.to_string())?;
    if a != b {
        return Err(format!("{id}: stripped decorated text differs:\n{a}\n{b}"));
    }
    Ok(())
}
