//! Blinded, randomized human evaluation of generated summaries.
//!
//! Annotators judge every system's summary of a review without knowing which
//! system wrote it. Each review is two pages: page one shows the generated
//! summaries alone (relevance, plausibility); page two adds the reference
//! summary (the direction of its finding, and each summary's agreement with
//! it). Judgments go to an append-only journal before they are acknowledged,
//! and the in-memory state is rebuilt from that journal at startup.

mod protocol;
mod server;
mod store;

pub use protocol::{Direction, JudgmentValue, Question, QuestionScope};
pub use server::{router, serve};
pub use store::{
    AnnotateError, AnnotationConfig, AnnotationTask, ExportRow, JudgmentRecord, JudgmentRequest, NextTask, ReviewItem,
    Slot, Store,
};

use evsynth::stats::{PairedRatings, StatsError};

/// Pairs two annotators' ordinal answers to `question` on the items both
/// judged, in export order.
pub fn paired_ratings(
    rows: &[ExportRow],
    question: Question,
    annotator_a: &str,
    annotator_b: &str,
) -> Result<PairedRatings, StatsError> {
    let (lo, hi) = question
        .ordinal_range()
        .ok_or_else(|| StatsError::InvalidRatings(format!("{question} is not an ordinal question")))?;
    let value_of = |annotator: &str| -> std::collections::BTreeMap<(String, Option<String>), i64> {
        rows.iter()
            .filter(|r| r.annotator_id == annotator && r.question == question)
            .filter_map(|r| match r.value {
                JudgmentValue::Ordinal(v) => Some(((r.review_id.clone(), r.system_id.clone()), v)),
                JudgmentValue::Category(_) => None,
            })
            .collect()
    };
    let a = value_of(annotator_a);
    let b = value_of(annotator_b);
    let pairs: Vec<(i64, i64)> = a.iter().filter_map(|(k, va)| b.get(k).map(|vb| (*va, *vb))).collect();
    PairedRatings::new(lo, hi, pairs)
}

/// Parses line-delimited export records.
pub fn read_export(text: &str) -> Result<Vec<ExportRow>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
