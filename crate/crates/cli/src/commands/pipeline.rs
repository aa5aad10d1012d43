use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use evsynth::corpus::Review;
use evsynth::input_builder::assemble;
use evsynth::summarizer::{
    standard_variants, run_systems, BaselineBackend, RemoteBackend, RunOutput, SummaryBackend, SystemConfig,
};
use evsynth::tagger::{tag_study, CueRobProvider, LexiconProvider, RemoteSpanProvider, RobProvider, SpanProvider, TagSet};
use rayon::prelude::*;
use serde_json::json;

use super::Output;
use crate::config::{BackendKind, TaggerKind};
use crate::error::{Category, CliError};
use crate::io::{self, ReviewTags};
use crate::{BackendFlags, BuildInputsArgs, Ctx, SummarizeArgs, TagArgs, TaggerFlags};

pub fn pool(ctx: &Ctx) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(ctx.cfg.jobs()).build().expect("thread pool builds")
}

/// Tags every study, in corpus order.
pub fn compute_tags(ctx: &Ctx, reviews: &[Review], flags: &TaggerFlags) -> Result<Vec<ReviewTags>, CliError> {
    let kind = flags.tagger.unwrap_or(ctx.cfg.tagger.kind);
    let spans: Box<dyn SpanProvider> = match kind {
        TaggerKind::Lexicon => Box::new(LexiconProvider::bundled()),
        TaggerKind::Remote => {
            let url = flags
                .tagger_url
                .clone()
                .or_else(|| ctx.cfg.tagger.url.clone())
                .ok_or_else(|| CliError::config("the remote tagger needs --tagger-url or [tagger] url"))?;
            Box::new(RemoteSpanProvider::new(&url, ctx.cfg.remote))
        }
    };
    let cues = CueRobProvider;
    let rob: Option<&dyn RobProvider> = ctx.cfg.tagger.rob_cues.then_some(&cues as &dyn RobProvider);
    let min_score = ctx.cfg.tagger.min_score;
    pool(ctx).install(|| {
        reviews
            .par_iter()
            .map(|r| {
                let studies = r
                    .studies
                    .iter()
                    .map(|d| tag_study(d, spans.as_ref(), rob, min_score))
                    .collect::<Result<Vec<TagSet>, _>>()
                    .map_err(|e| CliError::from(e).with_context(&r.review_id))?;
                Ok(ReviewTags { review_id: r.review_id.clone(), studies })
            })
            .collect()
    })
}

/// Tags from `--tags`, or computed on the spot.
pub fn load_or_compute_tags(
    ctx: &Ctx,
    reviews: &[Review],
    flags: &TaggerFlags,
) -> Result<HashMap<String, Vec<TagSet>>, CliError> {
    match &flags.tags {
        Some(path) => io::read_tags(path),
        None => Ok(compute_tags(ctx, reviews, flags)?.into_iter().map(|t| (t.review_id, t.studies)).collect()),
    }
}

pub fn tag(ctx: &Ctx, args: TagArgs) -> Result<Output, CliError> {
    let reviews = io::corpus(&args.corpus)?;
    let tags = compute_tags(ctx, &reviews, &args.tagger)?;
    io::write_jsonl(Some(&args.out), &tags)?;
    let spans: usize = tags.iter().flat_map(|t| &t.studies).map(|s| s.spans.len()).sum();
    Ok(Output::new(
        format!("tagged {} reviews, {spans} spans -> {}", tags.len(), args.out.display()),
        json!({"reviews": tags.len(), "spans": spans}),
    ))
}

pub fn build_inputs(ctx: &Ctx, args: BuildInputsArgs) -> Result<Output, CliError> {
    let reviews = io::corpus(&args.corpus)?;
    let cfg = ctx.build_config(&args.build);
    cfg.validate()?;
    let tags = load_or_compute_tags(ctx, &reviews, &args.tagger)?;
    let inputs = pool(ctx).install(|| {
        reviews
            .par_iter()
            .map(|r| {
                let t = tags.get(&r.review_id).map(Vec::as_slice).unwrap_or(&[]);
                assemble(r, &cfg, t).map_err(CliError::from)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    io::write_jsonl(Some(&args.out), &inputs)?;
    let truncated = inputs.iter().filter(|i| i.truncated.is_some()).count();
    let mean_tokens = super::mean(&inputs.iter().map(|i| i.token_count as f64).collect::<Vec<_>>());
    Ok(Output::new(
        format!(
            "built {} inputs (budget {}, decorate {}, sort {}): mean {:.1} tokens, {truncated} truncated -> {}",
            inputs.len(),
            cfg.token_budget,
            cfg.decorate,
            cfg.sort_by_evidence,
            mean_tokens,
            args.out.display()
        ),
        json!({"inputs": inputs.len(), "mean_tokens": mean_tokens, "truncated": truncated, "config": cfg}),
    ))
}

fn remote_url(ctx: &Ctx, flags: &BackendFlags) -> Result<String, CliError> {
    flags
        .backend_url
        .clone()
        .or_else(|| ctx.cfg.backend.url.clone())
        .ok_or_else(|| CliError::config("the remote backend needs --backend-url or [backend] url"))
}

/// (backend for the `xsum` variant, backend for everything else)
pub fn backends(ctx: &Ctx, flags: &BackendFlags) -> Result<(Arc<dyn SummaryBackend>, Arc<dyn SummaryBackend>), CliError> {
    match flags.backend.unwrap_or(ctx.cfg.backend.kind) {
        BackendKind::Baseline => {
            let b: Arc<dyn SummaryBackend> = Arc::new(BaselineBackend::default());
            Ok((Arc::clone(&b), b))
        }
        BackendKind::Remote => {
            let url = remote_url(ctx, flags)?;
            let main: Arc<dyn SummaryBackend> = Arc::new(RemoteBackend::new(&url, ctx.cfg.remote));
            let xsum: Arc<dyn SummaryBackend> = match &ctx.cfg.backend.xsum_url {
                Some(u) => Arc::new(RemoteBackend::new(u, ctx.cfg.remote)),
                None => Arc::clone(&main),
            };
            Ok((xsum, main))
        }
    }
}

pub fn run_grid(
    ctx: &Ctx,
    reviews: &[Review],
    tags: &HashMap<String, Vec<TagSet>>,
    systems: &[SystemConfig],
) -> Result<RunOutput, CliError> {
    Ok(run_systems(reviews, tags, systems, ctx.cfg.jobs())?)
}

pub fn summarize(ctx: &Ctx, args: SummarizeArgs) -> Result<Output, CliError> {
    let reviews = io::corpus(&args.corpus)?;
    let build = ctx.build_config(&args.build);
    let tags = load_or_compute_tags(ctx, &reviews, &args.tagger)?;
    let (xsum, main) = backends(ctx, &args.backend)?;
    let systems = if args.variants {
        standard_variants(build, xsum, main, ctx.cfg.decoding)
    } else {
        vec![SystemConfig { system_id: args.system.clone(), build, backend: main, params: ctx.cfg.decoding }]
    };
    let out = run_grid(ctx, &reviews, &tags, &systems)?;
    io::write_jsonl(Some(&args.out), &out.summaries)?;
    write_failures(args.failures.as_deref(), &out)?;
    if out.summaries.is_empty() && !out.failures.is_empty() {
        return Err(CliError::new(
            Category::Remote,
            format!("every cell failed; first error: {}", out.failures[0].error),
        ));
    }
    Ok(Output::new(
        format!(
            "{} summaries from {} system(s), {} failed cell(s) -> {}",
            out.summaries.len(),
            systems.len(),
            out.failures.len(),
            args.out.display()
        ),
        json!({"summaries": out.summaries.len(), "systems": systems.len(), "failures": out.failures}),
    ))
}

pub fn write_failures(path: Option<&Path>, out: &RunOutput) -> Result<(), CliError> {
    for f in &out.failures {
        log::warn!("{} / {} failed: {}", f.review_id, f.system_id, f.error);
    }
    match path {
        Some(p) => io::write_jsonl(Some(p), &out.failures),
        None => Ok(()),
    }
}
