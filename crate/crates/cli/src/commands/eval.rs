use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use evsynth::corpus::Review;
use evsynth::metrics::{
    bundled_classifier, bundled_training_set, findings_jsd, read_training_set, rouge_l, train_classifier, LabelSpace,
    LinearTextClassifier, TrainingHyper,
};
use evsynth::summarizer::GeneratedSummary;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{mean, Output};
use crate::error::CliError;
use crate::{io, Ctx, EvalCmd, TrainArgs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeRow {
    pub review_id: String,
    pub system_id: String,
    pub rouge_l_p: f64,
    pub rouge_l_r: f64,
    pub rouge_l_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsdRow {
    pub review_id: String,
    pub system_id: String,
    pub findings_jsd: f64,
    pub generated_punchline: String,
    pub reference_punchline: String,
    pub generated_p_sig: f64,
    pub reference_p_sig: f64,
    pub generated_low_confidence: bool,
    pub reference_low_confidence: bool,
}

fn references(reviews: &[Review]) -> HashMap<&str, &str> {
    reviews.iter().map(|r| (r.review_id.as_str(), r.target_summary.as_str())).collect()
}

fn reference_for<'a>(refs: &HashMap<&str, &'a str>, s: &GeneratedSummary) -> Result<&'a str, CliError> {
    refs.get(s.review_id.as_str())
        .copied()
        .ok_or_else(|| CliError::input(format!("summary for unknown review {:?}", s.review_id)))
}

pub fn score_rouge(summaries: &[GeneratedSummary], reviews: &[Review]) -> Result<Vec<RougeRow>, CliError> {
    let refs = references(reviews);
    summaries
        .par_iter()
        .map(|s| {
            let r = rouge_l(&s.text, reference_for(&refs, s)?);
            Ok(RougeRow {
                review_id: s.review_id.clone(),
                system_id: s.system_id.clone(),
                rouge_l_p: r.precision,
                rouge_l_r: r.recall,
                rouge_l_f: r.f,
            })
        })
        .collect()
}

pub fn score_jsd(
    summaries: &[GeneratedSummary],
    reviews: &[Review],
    selector: &LinearTextClassifier,
    direction: &LinearTextClassifier,
) -> Result<Vec<JsdRow>, CliError> {
    let refs = references(reviews);
    summaries
        .par_iter()
        .map(|s| {
            let f = findings_jsd(&s.text, reference_for(&refs, s)?, selector, direction)
                .map_err(|e| CliError::from(e).with_context(&format!("{} / {}", s.review_id, s.system_id)))?;
            Ok(JsdRow {
                review_id: s.review_id.clone(),
                system_id: s.system_id.clone(),
                findings_jsd: f.value,
                generated_punchline: f.generated.sentence.text,
                reference_punchline: f.reference.sentence.text,
                generated_p_sig: f.generated_direction.p_sig,
                reference_p_sig: f.reference_direction.p_sig,
                generated_low_confidence: f.generated.low_confidence,
                reference_low_confidence: f.reference.low_confidence,
            })
        })
        .collect()
}

/// Mean of `value` per system, in first-seen order of systems.
pub fn per_system<T>(rows: &[T], system: impl Fn(&T) -> &str, value: impl Fn(&T) -> f64) -> Vec<(String, f64, usize)> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        let s = system(r);
        if !acc.contains_key(s) {
            order.push(s);
        }
        acc.entry(s).or_default().push(value(r));
    }
    order.into_iter().map(|s| (s.to_string(), mean(&acc[s]), acc[s].len())).collect()
}

pub fn load_model(path: Option<&Path>, space: LabelSpace) -> Result<LinearTextClassifier, CliError> {
    match path {
        Some(p) => {
            let m = LinearTextClassifier::load(p).map_err(|e| CliError::from(e).with_context(&p.display().to_string()))?;
            if m.label_space != space {
                return Err(CliError::config(format!(
                    "{}: expected a {space} model, found {}",
                    p.display(),
                    m.label_space
                )));
            }
            Ok(m)
        }
        None => Ok(bundled_classifier(space)),
    }
}

fn table(rows: &[(String, f64, usize)], metric: &str) -> String {
    let mut out = format!("{:<24} {:>6} {:>10}\n", "system", "n", metric);
    for (s, m, n) in rows {
        out.push_str(&format!("{s:<24} {n:>6} {m:>10.4}\n"));
    }
    out
}

pub fn run(ctx: &Ctx, cmd: EvalCmd) -> Result<Output, CliError> {
    let pool = super::pipeline::pool(ctx);
    match cmd {
        EvalCmd::Rouge { candidates, references, out } => {
            let summaries: Vec<GeneratedSummary> = io::read_jsonl(&candidates)?;
            let reviews = io::corpus(&references)?;
            let rows = pool.install(|| score_rouge(&summaries, &reviews))?;
            if let Some(p) = &out {
                io::write_jsonl(Some(p), &rows)?;
            }
            let systems = per_system(&rows, |r| &r.system_id, |r| r.rouge_l_f);
            Ok(Output::new(
                table(&systems, "ROUGE-L F"),
                json!({
                    "rows": rows.len(),
                    "mean_rouge_l_f": mean(&rows.iter().map(|r| r.rouge_l_f).collect::<Vec<_>>()),
                    "systems": systems.iter().map(|(s, m, n)| json!({"system_id": s, "n": n, "rouge_l_f": m})).collect::<Vec<_>>(),
                }),
            ))
        }
        EvalCmd::FindingsJsd { candidates, references, out, selector, direction } => {
            let summaries: Vec<GeneratedSummary> = io::read_jsonl(&candidates)?;
            let reviews = io::corpus(&references)?;
            let sel = load_model(selector.as_deref(), LabelSpace::Punchline)?;
            let dir = load_model(direction.as_deref(), LabelSpace::Direction)?;
            let rows = pool.install(|| score_jsd(&summaries, &reviews, &sel, &dir))?;
            if let Some(p) = &out {
                io::write_jsonl(Some(p), &rows)?;
            }
            let low = rows.iter().filter(|r| r.generated_low_confidence || r.reference_low_confidence).count();
            let systems = per_system(&rows, |r| &r.system_id, |r| r.findings_jsd);
            Ok(Output::new(
                format!("{}{low} of {} rows had a low-confidence punchline\n", table(&systems, "JSD"), rows.len()),
                json!({
                    "rows": rows.len(),
                    "low_confidence": low,
                    "mean_findings_jsd": mean(&rows.iter().map(|r| r.findings_jsd).collect::<Vec<_>>()),
                    "systems": systems.iter().map(|(s, m, n)| json!({"system_id": s, "n": n, "findings_jsd": m})).collect::<Vec<_>>(),
                }),
            ))
        }
    }
}

pub fn train(ctx: &Ctx, args: TrainArgs) -> Result<Output, CliError> {
    let examples = match &args.data {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            read_training_set(&text, args.label_space).map_err(|e| CliError::from(e).with_context(&p.display().to_string()))?
        }
        None => bundled_training_set(args.label_space),
    };
    let mut hyper = TrainingHyper { seed: ctx.cfg.seed, ..TrainingHyper::default() };
    if let Some(e) = args.epochs {
        hyper.epochs = e;
    }
    if let Some(lr) = args.learning_rate {
        hyper.learning_rate = lr;
    }
    if let Some(l2) = args.l2 {
        hyper.l2 = l2;
    }
    let model = train_classifier(&examples, args.label_space, &hyper)?;
    model.save(&args.out)?;
    let correct = examples.iter().filter(|(t, y)| (model.logit(t) >= 0.0) == *y).count();
    let accuracy = correct as f64 / examples.len() as f64;
    Ok(Output::new(
        format!(
            "trained {} classifier on {} examples, training accuracy {accuracy:.3} -> {}",
            args.label_space,
            examples.len(),
            args.out.display()
        ),
        json!({"examples": examples.len(), "training_accuracy": accuracy, "hyper": hyper}),
    ))
}
