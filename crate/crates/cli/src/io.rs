//! Line-delimited JSON artifact files.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use evsynth::corpus::{load_corpus, Review};
use evsynth::tagger::TagSet;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::input(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Writes `rows` to `path`, or to stdout when `path` is `None`.
pub fn write_jsonl<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).expect("rows serialize");
        buf.push(b'\n');
    }
    write_bytes(path, &buf)
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// Loads a corpus in canonical order (by review id).
pub fn corpus(path: &Path) -> Result<Vec<Review>, CliError> {
    let mut reviews = load_corpus(path)?;
    reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));
    Ok(reviews)
}

/// Tags of every study of one review; the tag-file line format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTags {
    pub review_id: String,
    pub studies: Vec<TagSet>,
}

pub fn read_tags(path: &Path) -> Result<HashMap<String, Vec<TagSet>>, CliError> {
    let rows: Vec<ReviewTags> = read_jsonl(path)?;
    let mut out = HashMap::with_capacity(rows.len());
    for r in rows {
        if out.insert(r.review_id.clone(), r.studies).is_some() {
            return Err(CliError::input(format!("{}: duplicate review {:?}", path.display(), r.review_id)));
        }
    }
    Ok(out)
}
