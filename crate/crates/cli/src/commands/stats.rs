use std::collections::BTreeMap;
use std::path::Path;

use evsynth::stats::{ols_regress, paired_ttest, weighted_kappa};
use evsynth_annotate::{paired_ratings, read_export};
use serde_json::{json, Value};

use super::{mean, Output};
use crate::error::CliError;
use crate::{io, Ctx, StatsCmd};

/// (annotator or "", review, system)
type RowKey = (String, String, String);

fn str_field<'a>(row: &'a Value, name: &str) -> Option<&'a str> {
    row.get(name).and_then(Value::as_str)
}

/// Numeric `field` of every score row, restricted to `question` when given.
/// Works for both metric files and annotation exports.
fn numeric_rows(path: &Path, field: &str, question: Option<&str>) -> Result<Vec<(RowKey, f64)>, CliError> {
    let rows: Vec<Value> = io::read_jsonl(path)?;
    let mut out = Vec::new();
    for row in &rows {
        if question.is_some_and(|q| str_field(row, "question") != Some(q)) {
            continue;
        }
        let (Some(review), Some(system)) = (str_field(row, "review_id"), str_field(row, "system_id")) else {
            continue;
        };
        let value = row.get(field).and_then(Value::as_f64).ok_or_else(|| {
            CliError::input(format!("{}: row for {review:?} has no numeric {field:?}", path.display()))
        })?;
        let annotator = str_field(row, "annotator_id").unwrap_or_default();
        out.push(((annotator.to_string(), review.to_string(), system.to_string()), value));
    }
    Ok(out)
}

/// Values of systems `x` and `y` paired on (annotator, review).
pub fn pair_systems(rows: &[(RowKey, f64)], x: &str, y: &str) -> (Vec<f64>, Vec<f64>) {
    let pick = |system: &str| -> BTreeMap<(&str, &str), f64> {
        rows.iter()
            .filter(|((_, _, s), _)| s == system)
            .map(|((a, r, _), v)| ((a.as_str(), r.as_str()), *v))
            .collect()
    };
    let xs = pick(x);
    let ys = pick(y);
    xs.iter().filter_map(|(k, xv)| ys.get(k).map(|yv| (*xv, *yv))).unzip()
}

/// Mean value per (review, system), averaging over annotators.
pub fn by_cell(rows: &[(RowKey, f64)]) -> BTreeMap<(String, String), f64> {
    let mut acc: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for ((_, r, s), v) in rows {
        acc.entry((r.clone(), s.clone())).or_default().push(*v);
    }
    acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
}

pub fn run(_ctx: &Ctx, cmd: StatsCmd) -> Result<Output, CliError> {
    match cmd {
        StatsCmd::Kappa { export, question, annotators } => {
            let text = std::fs::read_to_string(&export).map_err(|e| CliError::io(&export, e))?;
            let rows = read_export(&text).map_err(|e| CliError::input(format!("{}: {e}", export.display())))?;
            let ratings = paired_ratings(&rows, question, &annotators[0], &annotators[1])?;
            let kappa = weighted_kappa(&ratings)?;
            Ok(Output::new(
                format!(
                    "{question}: linearly weighted kappa {kappa:.4} over {} shared items ({} vs {})",
                    ratings.pairs.len(),
                    annotators[0],
                    annotators[1]
                ),
                json!({"question": question.to_string(), "kappa": kappa, "items": ratings.pairs.len()}),
            ))
        }
        StatsCmd::Ttest { scores, field, question, x, y } => {
            let rows = numeric_rows(&scores, &field, question.as_deref())?;
            let (xs, ys) = pair_systems(&rows, &x, &y);
            let t = paired_ttest(&xs, &ys)?;
            Ok(Output::new(
                format!(
                    "{field}: {x} - {y} = {:.4} over {} pairs, t({}) = {:.4}, p = {:.4}",
                    t.mean_difference,
                    xs.len(),
                    t.df,
                    t.t,
                    t.p_value
                ),
                json!({"pairs": xs.len(), "result": t}),
            ))
        }
        StatsCmd::Regress { x_scores, x_field, y_scores, y_field, y_question } => {
            let xs = by_cell(&numeric_rows(&x_scores, &x_field, None)?);
            let ys = by_cell(&numeric_rows(&y_scores, &y_field, y_question.as_deref())?);
            let (xv, yv): (Vec<f64>, Vec<f64>) =
                xs.iter().filter_map(|(k, xv)| ys.get(k).map(|yv| (*xv, *yv))).unzip();
            let r = ols_regress(&xv, &yv)?;
            Ok(Output::new(
                format!(
                    "{y_field} ~ {x_field}: slope {:.4} [{:.4}, {:.4}], p = {:.4}, R^2 = {:.4}, n = {}",
                    r.slope, r.slope_ci_low, r.slope_ci_high, r.p_value, r.r_squared, r.n
                ),
                json!({"result": r}),
            ))
        }
    }
}
