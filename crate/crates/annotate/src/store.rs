use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use evsynth::corpus::{load_corpus, Review};
use evsynth::hashing::hash_parts;
use evsynth::summarizer::GeneratedSummary;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::protocol::{Direction, JudgmentValue, Question, QuestionScope};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),
    #[error("invalid or expired session")]
    InvalidSession,
    #[error("unknown review {0:?}")]
    UnknownReview(String),
    #[error("review {review_id:?} has no slot {slot_id:?}")]
    UnknownSlot { review_id: String, slot_id: String },
    #[error("bad judgment: {0}")]
    BadJudgment(String),
    #[error("{value} is outside the scale of {question}")]
    OutOfScale { question: Question, value: String },
    #[error("page-two questions for review {0:?} need every page-one answer first")]
    PageOrder(String),
    #[error("missing or invalid admin token")]
    Unauthorized,
    #[error("config: {0}")]
    Config(String),
    #[error("journal line {line}: {message}")]
    Journal { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl AnnotateError {
    pub fn kind(&self) -> &'static str {
        match self {
            AnnotateError::UnknownAnnotator(_) => "unknown_annotator",
            AnnotateError::InvalidSession => "invalid_session",
            AnnotateError::UnknownReview(_) => "unknown_review",
            AnnotateError::UnknownSlot { .. } => "unknown_slot",
            AnnotateError::BadJudgment(_) => "bad_judgment",
            AnnotateError::OutOfScale { .. } => "out_of_scale",
            AnnotateError::PageOrder(_) => "page_order",
            AnnotateError::Unauthorized => "unauthorized",
            AnnotateError::Config(_) => "config",
            AnnotateError::Journal { .. } => "journal",
            AnnotateError::Io(_) => "io",
        }
    }
}

/// Server configuration, read from TOML. Relative paths resolve against the
/// directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationConfig {
    pub global_seed: u64,
    pub admin_token: String,
    pub annotators: Vec<String>,
    /// Review bundles (for topic titles and reference summaries).
    pub corpus: PathBuf,
    /// Generated summaries, one JSON record per line.
    pub summaries: PathBuf,
    pub journal: PathBuf,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
}

impl AnnotationConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg: AnnotationConfig =
            toml::from_str(&text).map_err(|e| AnnotateError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.corpus, &mut cfg.summaries, &mut cfg.journal] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.static_dir.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(cfg)
    }
}

/// One review with the summaries each system produced for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewItem {
    pub review_id: String,
    pub topic_title: String,
    pub reference_summary: String,
    /// (system_id, summary text), sorted by system_id.
    pub systems: Vec<(String, String)>,
}

impl ReviewItem {
    /// Joins summaries to their reviews; reviews without summaries are
    /// skipped, and the corpus order is kept.
    pub fn from_run(reviews: &[Review], summaries: &[GeneratedSummary]) -> Result<Vec<ReviewItem>, AnnotateError> {
        let mut by_review: HashMap<&str, Vec<(String, String)>> = HashMap::new();
        for s in summaries {
            by_review.entry(s.review_id.as_str()).or_default().push((s.system_id.clone(), s.text.clone()));
        }
        let known: HashSet<&str> = reviews.iter().map(|r| r.review_id.as_str()).collect();
        if let Some(orphan) = by_review.keys().find(|id| !known.contains(*id)) {
            return Err(AnnotateError::Config(format!("summary for review {orphan:?} which is not in the corpus")));
        }
        let mut items = Vec::new();
        for r in reviews {
            let Some(mut systems) = by_review.remove(r.review_id.as_str()) else { continue };
            systems.sort();
            if systems.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(AnnotateError::Config(format!("duplicate system for review {:?}", r.review_id)));
            }
            items.push(ReviewItem {
                review_id: r.review_id.clone(),
                topic_title: r.topic_title.clone(),
                reference_summary: r.target_summary.clone(),
                systems,
            });
        }
        Ok(items)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub slot_id: String,
    pub summary: String,
}

/// What an annotator sees; carries no system identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub review_id: String,
    pub topic_title: String,
    pub page: u8,
    pub slots: Vec<Slot>,
    pub questions: Vec<Value>,
    /// Shown on page two only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_summary: Option<String>,
    pub reviews_completed: usize,
    pub reviews_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTask {
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<AnnotationTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub review_id: String,
    #[serde(default)]
    pub slot_id: Option<String>,
    pub question: Question,
    pub value: Value,
}

/// A stored judgment; also the journal line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub annotator_id: String,
    pub review_id: String,
    pub slot_id: Option<String>,
    pub system_id: Option<String>,
    pub question: Question,
    pub value: JudgmentValue,
    pub timestamp: String,
}

/// One line of the unblinded export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub annotator_id: String,
    pub review_id: String,
    pub system_id: Option<String>,
    pub question: Question,
    pub value: JudgmentValue,
    pub timestamp: String,
}

type Key = (String, String, String, Question);

pub struct Store {
    global_seed: u64,
    admin_token: String,
    annotators: HashSet<String>,
    reviews: Vec<ReviewItem>,
    index: HashMap<String, usize>,
    judgments: RwLock<BTreeMap<Key, JudgmentRecord>>,
    sessions: RwLock<HashMap<String, String>>,
    /// Single writer: every accepted judgment is appended here first.
    journal: Mutex<Option<File>>,
}

impl Store {
    pub fn open(cfg: &AnnotationConfig) -> Result<Store, AnnotateError> {
        let reviews = load_corpus(&cfg.corpus).map_err(|e| AnnotateError::Config(e.to_string()))?;
        let text = fs::read_to_string(&cfg.summaries)?;
        let summaries: Vec<GeneratedSummary> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l)
                    .map_err(|e| AnnotateError::Config(format!("{} line {}: {e}", cfg.summaries.display(), i + 1)))
            })
            .collect::<Result<_, _>>()?;
        let items = ReviewItem::from_run(&reviews, &summaries)?;
        Store::new(cfg.global_seed, &cfg.admin_token, &cfg.annotators, items, Some(&cfg.journal))
    }

    /// Builds a store and replays `journal` if it exists. Without a journal
    /// path, judgments live in memory only.
    pub fn new(
        global_seed: u64,
        admin_token: &str,
        annotators: &[String],
        reviews: Vec<ReviewItem>,
        journal: Option<&Path>,
    ) -> Result<Store, AnnotateError> {
        if admin_token.is_empty() {
            return Err(AnnotateError::Config("admin_token must not be empty".into()));
        }
        let index = reviews.iter().enumerate().map(|(i, r)| (r.review_id.clone(), i)).collect();
        let store = Store {
            global_seed,
            admin_token: admin_token.to_string(),
            annotators: annotators.iter().cloned().collect(),
            reviews,
            index,
            judgments: RwLock::new(BTreeMap::new()),
            sessions: RwLock::new(HashMap::new()),
            journal: Mutex::new(None),
        };
        if let Some(path) = journal {
            if path.exists() {
                store.replay(path)?;
            }
            let file = OpenOptions::new().create(true).append(true).open(path)?;
            *store.journal.lock().unwrap() = Some(file);
        }
        Ok(store)
    }

    fn replay(&self, path: &Path) -> Result<(), AnnotateError> {
        let reader = BufReader::new(File::open(path)?);
        let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
        let mut state = self.judgments.write().unwrap();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: JudgmentRecord = match serde_json::from_str(line) {
                Ok(r) => r,
                // a torn final line was never acknowledged
                Err(e) if i + 1 == lines.len() => {
                    log::warn!("ignoring incomplete final journal line {}: {e}", i + 1);
                    continue;
                }
                Err(e) => return Err(AnnotateError::Journal { line: i + 1, message: e.to_string() }),
            };
            let bad = |message: String| AnnotateError::Journal { line: i + 1, message };
            if !self.annotators.contains(&rec.annotator_id) {
                return Err(bad(format!("annotator {:?} is not configured", rec.annotator_id)));
            }
            let idx = *self.index.get(&rec.review_id).ok_or_else(|| bad(format!("unknown review {:?}", rec.review_id)))?;
            let expected = match &rec.slot_id {
                Some(slot) => Some(
                    self.system_for_slot(idx, &rec.annotator_id, slot)
                        .ok_or_else(|| bad(format!("unknown slot {slot:?}")))?,
                ),
                None => None,
            };
            if expected.as_deref() != rec.system_id.as_deref() {
                return Err(bad("slot to system mapping differs; was the seed changed?".into()));
            }
            state.insert(key(&rec), rec);
        }
        Ok(())
    }

    pub fn reviews(&self) -> &[ReviewItem] {
        &self.reviews
    }

    pub fn system_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.reviews.iter().flat_map(|r| r.systems.iter().map(|s| s.0.clone())).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn create_session(&self, annotator_id: &str) -> Result<String, AnnotateError> {
        if !self.annotators.contains(annotator_id) {
            return Err(AnnotateError::UnknownAnnotator(annotator_id.to_string()));
        }
        let token = uuid::Uuid::new_v4().simple().to_string();
        self.sessions.write().unwrap().insert(token.clone(), annotator_id.to_string());
        Ok(token)
    }

    fn annotator(&self, session: &str) -> Result<String, AnnotateError> {
        self.sessions.read().unwrap().get(session).cloned().ok_or(AnnotateError::InvalidSession)
    }

    /// Display order of the systems of review `idx` for `annotator`, as
    /// indices into `systems`.
    pub fn permutation(&self, idx: usize, annotator: &str) -> Vec<usize> {
        let review = &self.reviews[idx];
        let mut order: Vec<usize> = (0..review.systems.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(hash_parts(self.global_seed, &["slots", &review.review_id, annotator]));
        order.shuffle(&mut rng);
        order
    }

    fn slot_ids(&self, idx: usize) -> Vec<String> {
        (1..=self.reviews[idx].systems.len()).map(|k| format!("slot-{k}")).collect()
    }

    fn system_for_slot(&self, idx: usize, annotator: &str, slot_id: &str) -> Option<String> {
        let pos = self.slot_ids(idx).iter().position(|s| s == slot_id)?;
        let sys = self.permutation(idx, annotator)[pos];
        Some(self.reviews[idx].systems[sys].0.clone())
    }

    fn page_complete(&self, state: &BTreeMap<Key, JudgmentRecord>, annotator: &str, idx: usize, page: u8) -> bool {
        let review_id = &self.reviews[idx].review_id;
        let slots = self.slot_ids(idx);
        Question::on_page(page).all(|q| match q.scope() {
            QuestionScope::Review => state.contains_key(&(annotator.into(), review_id.clone(), String::new(), q)),
            QuestionScope::Slot => {
                slots.iter().all(|s| state.contains_key(&(annotator.into(), review_id.clone(), s.clone(), q)))
            }
        })
    }

    pub fn next_task(&self, session: &str) -> Result<NextTask, AnnotateError> {
        let annotator = self.annotator(session)?;
        let state = self.judgments.read().unwrap();
        let total = self.reviews.len();
        let done = |i: usize| self.page_complete(&state, &annotator, i, 1) && self.page_complete(&state, &annotator, i, 2);
        let completed = (0..total).filter(|&i| done(i)).count();
        let Some(idx) = (0..total).find(|&i| !done(i)) else {
            return Ok(NextTask { done: true, task: None });
        };
        let page = if self.page_complete(&state, &annotator, idx, 1) { 2 } else { 1 };
        let review = &self.reviews[idx];
        let slots = self
            .slot_ids(idx)
            .into_iter()
            .zip(self.permutation(idx, &annotator))
            .map(|(slot_id, sys)| Slot { slot_id, summary: review.systems[sys].1.clone() })
            .collect();
        Ok(NextTask {
            done: false,
            task: Some(AnnotationTask {
                review_id: review.review_id.clone(),
                topic_title: review.topic_title.clone(),
                page,
                slots,
                questions: Question::on_page(page).map(Question::schema).collect(),
                reference_summary: (page == 2).then(|| review.reference_summary.clone()),
                reviews_completed: completed,
                reviews_total: total,
            }),
        })
    }

    pub fn submit(&self, session: &str, req: &JudgmentRequest) -> Result<JudgmentRecord, AnnotateError> {
        let annotator = self.annotator(session)?;
        let idx = *self.index.get(&req.review_id).ok_or_else(|| AnnotateError::UnknownReview(req.review_id.clone()))?;
        let value = parse_value(req.question, &req.value)?;
        let system_id = match (req.question.scope(), &req.slot_id) {
            (QuestionScope::Slot, Some(slot)) => Some(self.system_for_slot(idx, &annotator, slot).ok_or_else(|| {
                AnnotateError::UnknownSlot { review_id: req.review_id.clone(), slot_id: slot.clone() }
            })?),
            (QuestionScope::Slot, None) => {
                return Err(AnnotateError::BadJudgment(format!("{} needs a slot_id", req.question)))
            }
            (QuestionScope::Review, Some(_)) => {
                return Err(AnnotateError::BadJudgment(format!("{} is asked once per review", req.question)))
            }
            (QuestionScope::Review, None) => None,
        };

        let mut journal = self.journal.lock().unwrap();
        if req.question.page() == 2 && !self.page_complete(&self.judgments.read().unwrap(), &annotator, idx, 1) {
            return Err(AnnotateError::PageOrder(req.review_id.clone()));
        }
        let record = JudgmentRecord {
            annotator_id: annotator,
            review_id: req.review_id.clone(),
            slot_id: req.slot_id.clone(),
            system_id,
            question: req.question,
            value,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        };
        if let Some(file) = journal.as_mut() {
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        self.judgments.write().unwrap().insert(key(&record), record.clone());
        Ok(record)
    }

    /// Every stored judgment, in journal-independent canonical order.
    pub fn records(&self) -> Vec<JudgmentRecord> {
        self.judgments.read().unwrap().values().cloned().collect()
    }

    pub fn export_rows(&self, admin_token: &str) -> Result<Vec<ExportRow>, AnnotateError> {
        if admin_token.is_empty() || admin_token != self.admin_token {
            return Err(AnnotateError::Unauthorized);
        }
        let mut rows: Vec<ExportRow> = self
            .records()
            .into_iter()
            .map(|r| ExportRow {
                annotator_id: r.annotator_id,
                review_id: r.review_id,
                system_id: r.system_id,
                question: r.question,
                value: r.value,
                timestamp: r.timestamp,
            })
            .collect();
        rows.sort_by(|a, b| {
            (&a.annotator_id, &a.review_id, &a.system_id, a.question).cmp(&(
                &b.annotator_id,
                &b.review_id,
                &b.system_id,
                b.question,
            ))
        });
        Ok(rows)
    }

    /// The export as line-delimited JSON.
    pub fn export(&self, admin_token: &str) -> Result<String, AnnotateError> {
        let mut out = String::new();
        for row in self.export_rows(admin_token)? {
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
        Ok(out)
    }
}

fn key(r: &JudgmentRecord) -> Key {
    (r.annotator_id.clone(), r.review_id.clone(), r.slot_id.clone().unwrap_or_default(), r.question)
}

fn parse_value(question: Question, raw: &Value) -> Result<JudgmentValue, AnnotateError> {
    let value = match raw {
        Value::Number(n) => n.as_i64().map(JudgmentValue::Ordinal),
        Value::String(s) => serde_json::from_value::<Direction>(Value::String(s.clone())).ok().map(JudgmentValue::Category),
        _ => None,
    };
    match value {
        Some(v) if question.accepts(&v) => Ok(v),
        _ => Err(AnnotateError::OutOfScale { question, value: raw.to_string() }),
    }
}
