use evsynth::corpus::{split_corpus, write_corpus, SplitSpec};
use evsynth::tagger::extract_sample_size;
use serde_json::json;

use super::Output;
use crate::error::CliError;
use crate::{io, CorpusCmd, Ctx};

pub fn run(ctx: &Ctx, cmd: CorpusCmd) -> Result<Output, CliError> {
    match cmd {
        CorpusCmd::Validate { corpus } => {
            let reviews = io::corpus(&corpus)?;
            let studies: usize = reviews.iter().map(|r| r.studies.len()).sum();
            let with_n = reviews.iter().flat_map(|r| &r.studies).filter(|d| extract_sample_size(d).is_some()).count();
            let with_rob = reviews.iter().flat_map(|r| &r.studies).filter(|d| d.rob_low_prob.is_some()).count();
            Ok(Output::new(
                format!(
                    "{}: {} reviews, {studies} studies ({with_n} with a sample size, {with_rob} with a risk-of-bias estimate)",
                    corpus.display(),
                    reviews.len()
                ),
                json!({"reviews": reviews.len(), "studies": studies, "with_sample_size": with_n, "with_rob": with_rob}),
            ))
        }
        CorpusCmd::Split { corpus, out_dir, fractions } => {
            let reviews = io::corpus(&corpus)?;
            let f = match fractions.as_deref() {
                Some(&[a, b, c]) => [a, b, c],
                Some(other) => {
                    return Err(CliError::config(format!("--fractions needs 3 values, got {}", other.len())))
                }
                None => ctx.cfg.split.fractions,
            };
            let spec = SplitSpec::new(f[0], f[1], f[2], ctx.cfg.seed)?;
            let splits = split_corpus(&reviews, &spec)?;
            let mut sizes = Vec::new();
            for (name, part) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
                let path = out_dir.join(format!("{name}.jsonl"));
                let mut buf = Vec::new();
                write_corpus(&mut buf, part).map_err(|e| CliError::io(&path, e))?;
                io::write_bytes(Some(&path), &buf)?;
                sizes.push(part.len());
            }
            Ok(Output::new(
                format!("train {} / dev {} / test {} -> {}", sizes[0], sizes[1], sizes[2], out_dir.display()),
                json!({"train": sizes[0], "dev": sizes[1], "test": sizes[2]}),
            ))
        }
    }
}
