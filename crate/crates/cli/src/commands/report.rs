use std::collections::HashSet;
use std::fmt::Write as _;

use evsynth::corpus::{split_corpus, SplitSpec};
use evsynth::metrics::LabelSpace;
use evsynth::summarizer::standard_variants;
use serde_json::json;

use super::eval::{load_model, per_system, score_jsd, score_rouge};
use super::pipeline::{backends, load_or_compute_tags, pool, run_grid, write_failures};
use super::{mean, Output};
use crate::error::CliError;
use crate::{io, Ctx, ReportArgs};

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.4}"),
        _ => "n/a".to_string(),
    }
}

pub fn run(ctx: &Ctx, args: ReportArgs) -> Result<Output, CliError> {
    let reviews = io::corpus(&args.corpus)?;
    let build = ctx.build_config(&args.build);
    build.validate()?;
    let tags = load_or_compute_tags(ctx, &reviews, &args.tagger)?;
    let (xsum, main) = backends(ctx, &args.backend)?;
    let systems = standard_variants(build, xsum, main, ctx.cfg.decoding);
    let out = run_grid(ctx, &reviews, &tags, &systems)?;
    write_failures(Some(&args.out_dir.join("failures.jsonl")), &out)?;

    let f = ctx.cfg.split.fractions;
    let splits = split_corpus(&reviews, &SplitSpec::new(f[0], f[1], f[2], ctx.cfg.seed)?)?;
    let dev: HashSet<&str> = splits.dev.iter().map(|r| r.review_id.as_str()).collect();
    let test: HashSet<&str> = splits.test.iter().map(|r| r.review_id.as_str()).collect();

    let selector = load_model(None, LabelSpace::Punchline)?;
    let direction = load_model(None, LabelSpace::Direction)?;
    let (rouge, jsd) = pool(ctx).install(|| -> Result<_, CliError> {
        Ok((score_rouge(&out.summaries, &reviews)?, score_jsd(&out.summaries, &reviews, &selector, &direction)?))
    })?;
    io::write_jsonl(Some(&args.out_dir.join("summaries.jsonl")), &out.summaries)?;
    io::write_jsonl(Some(&args.out_dir.join("rouge.jsonl")), &rouge)?;
    io::write_jsonl(Some(&args.out_dir.join("findings_jsd.jsonl")), &jsd)?;

    let rouge_on = |system: &str, keep: &dyn Fn(&str) -> bool| -> (Option<f64>, usize) {
        let xs: Vec<f64> =
            rouge.iter().filter(|r| r.system_id == system && keep(&r.review_id)).map(|r| r.rouge_l_f).collect();
        ((!xs.is_empty()).then(|| mean(&xs)), xs.len())
    };
    let jsd_means = per_system(&jsd, |r| &r.system_id, |r| r.findings_jsd);

    let mut md = String::new();
    writeln!(md, "# Model variants and ROUGE-L\n").unwrap();
    writeln!(
        md,
        "{} reviews ({} dev, {} test), token budget {}, seed {}.\n",
        reviews.len(),
        dev.len(),
        test.len(),
        build.token_budget,
        ctx.cfg.seed
    )
    .unwrap();
    writeln!(md, "| Variant | Decorate | Sort | ROUGE-L (dev) | ROUGE-L (test) | ROUGE-L (all) | findings-JSD | n |").unwrap();
    writeln!(md, "|---|---|---|---|---|---|---|---|").unwrap();
    let mut rows = Vec::new();
    for s in &systems {
        let id = s.system_id.as_str();
        let (d, _) = rouge_on(id, &|r| dev.contains(r));
        let (t, _) = rouge_on(id, &|r| test.contains(r));
        let (a, n) = rouge_on(id, &|_| true);
        let j = jsd_means.iter().find(|(sid, _, _)| sid == id).map(|(_, m, _)| *m);
        let mark = |b: bool| if b { "yes" } else { "no" };
        writeln!(
            md,
            "| {id} | {} | {} | {} | {} | {} | {} | {n} |",
            mark(s.build.decorate),
            mark(s.build.sort_by_evidence),
            cell(d),
            cell(t),
            cell(a),
            cell(j)
        )
        .unwrap();
        rows.push(json!({
            "system_id": id,
            "decorate": s.build.decorate,
            "sort_by_evidence": s.build.sort_by_evidence,
            "rouge_l_dev": d,
            "rouge_l_test": t,
            "rouge_l_all": a,
            "findings_jsd": j,
            "n": n,
        }));
    }
    if !out.failures.is_empty() {
        writeln!(md, "\n{} cell(s) failed; see failures.jsonl.", out.failures.len()).unwrap();
    }
    let report = json!({
        "reviews": reviews.len(),
        "dev": dev.len(),
        "test": test.len(),
        "token_budget": build.token_budget,
        "seed": ctx.cfg.seed,
        "failures": out.failures.len(),
        "variants": rows,
    });
    io::write_bytes(Some(&args.out_dir.join("report.md")), md.as_bytes())?;
    let mut pretty = serde_json::to_vec_pretty(&report).expect("report serializes");
    pretty.push(b'\n');
    io::write_bytes(Some(&args.out_dir.join("report.json")), &pretty)?;
    Ok(Output::new(md, report))
}
