//! `evsynth`: build encoder inputs, run summarizers, and evaluate the
//! results, one file-to-file step per subcommand.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod io;

use config::{BackendKind, RunConfig, TaggerKind};
use error::CliError;

#[derive(Parser)]
#[command(name = "evsynth", version, about = "Multi-document evidence synthesis harness")]
struct Cli {
    /// Run configuration (TOML); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel workers for per-review work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Print the command summary as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check or split a corpus file.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Tag PICO and punchline spans in every abstract.
    Tag(TagArgs),
    /// Assemble the encoder input of every review.
    BuildInputs(BuildInputsArgs),
    /// Generate summaries with one system or the five-variant grid.
    Summarize(SummarizeArgs),
    /// Score generated summaries against the references.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Train a punchline or direction classifier.
    TrainClassifier(TrainArgs),
    /// Agreement and significance statistics.
    #[command(subcommand)]
    Stats(StatsCmd),
    /// Human-evaluation server.
    #[command(subcommand)]
    Annotate(AnnotateCmd),
    /// Run the five variants end to end and tabulate ROUGE-L and findings-JSD.
    Report(ReportArgs),
}

#[derive(Subcommand)]
pub enum CorpusCmd {
    Validate {
        corpus: PathBuf,
    },
    Split {
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// train,dev,test fractions
        #[arg(long, value_delimiter = ',')]
        fractions: Option<Vec<f64>>,
    },
}

#[derive(Args, Clone, Default)]
pub struct BuildFlags {
    /// Encoder token budget.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Wrap tagged spans in marker tokens.
    #[arg(long)]
    pub decorate: bool,
    /// Order documents by sample size times low risk-of-bias probability.
    #[arg(long)]
    pub sort_evidence: bool,
}

#[derive(Args, Clone, Default)]
pub struct TaggerFlags {
    /// Precomputed tag file from `evsynth tag`; tags are computed in-process otherwise.
    #[arg(long)]
    pub tags: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub tagger: Option<TaggerKind>,
    #[arg(long)]
    pub tagger_url: Option<String>,
}

#[derive(Args, Clone, Default)]
pub struct BackendFlags {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub backend_url: Option<String>,
}

#[derive(Args)]
pub struct TagArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub tagger: TaggerFlags,
}

#[derive(Args)]
pub struct BuildInputsArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub build: BuildFlags,
    #[command(flatten)]
    pub tagger: TaggerFlags,
}

#[derive(Args)]
pub struct SummarizeArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Identifier recorded with every summary.
    #[arg(long, default_value = "system")]
    pub system: String,
    /// Run the five model variants instead of a single system.
    #[arg(long)]
    pub variants: bool,
    /// Where to write per-cell failures (line-delimited JSON).
    #[arg(long)]
    pub failures: Option<PathBuf>,
    #[command(flatten)]
    pub build: BuildFlags,
    #[command(flatten)]
    pub tagger: TaggerFlags,
    #[command(flatten)]
    pub backend: BackendFlags,
}

#[derive(Subcommand)]
pub enum EvalCmd {
    Rouge {
        /// Generated summaries.
        #[arg(long)]
        candidates: PathBuf,
        /// Corpus holding the reference summaries.
        #[arg(long)]
        references: PathBuf,
        /// Per-summary scores.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    FindingsJsd {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Punchline selector model; the bundled one otherwise.
        #[arg(long)]
        selector: Option<PathBuf>,
        /// Direction classifier model; the bundled one otherwise.
        #[arg(long)]
        direction: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct TrainArgs {
    /// Line-delimited {text, label} records; the bundled set otherwise.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_space: evsynth::metrics::LabelSpace,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2: Option<f64>,
}

#[derive(Subcommand)]
pub enum StatsCmd {
    /// Linearly weighted kappa between two annotators of an export.
    Kappa {
        #[arg(long)]
        export: PathBuf,
        #[arg(long)]
        question: evsynth_annotate::Question,
        /// Two annotator ids; naming one twice compares it with itself.
        #[arg(long, num_args = 2)]
        annotators: Vec<String>,
    },
    /// Paired t-test of one score between two systems.
    Ttest {
        /// Score file (from `eval`) or annotation export.
        #[arg(long)]
        scores: PathBuf,
        /// Numeric field to compare.
        #[arg(long, default_value = "value")]
        field: String,
        /// Restrict export rows to one question.
        #[arg(long)]
        question: Option<String>,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// OLS regression of one score on another, joined per (review, system).
    Regress {
        #[arg(long)]
        x_scores: PathBuf,
        #[arg(long)]
        x_field: String,
        #[arg(long)]
        y_scores: PathBuf,
        #[arg(long, default_value = "value")]
        y_field: String,
        #[arg(long)]
        y_question: Option<String>,
    },
}

#[derive(Subcommand)]
pub enum AnnotateCmd {
    Serve {
        /// Annotation server configuration (TOML).
        #[arg(long = "server-config")]
        server_config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: std::net::SocketAddr,
    },
    /// Export judgments from the journal without starting a server.
    Export {
        #[arg(long = "server-config")]
        server_config: PathBuf,
        #[arg(long)]
        token: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
pub struct ReportArgs {
    pub corpus: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub build: BuildFlags,
    #[command(flatten)]
    pub tagger: TaggerFlags,
    #[command(flatten)]
    pub backend: BackendFlags,
}

/// Resolved settings shared by all commands.
pub struct Ctx {
    pub cfg: RunConfig,
    pub json: bool,
}

impl Ctx {
    /// The run configuration with build flags applied.
    pub fn build_config(&self, flags: &BuildFlags) -> evsynth::input_builder::BuildConfig {
        let mut b = self.cfg.build;
        b.seed = self.cfg.seed;
        if let Some(budget) = flags.budget {
            b.token_budget = budget;
        }
        b.decorate |= flags.decorate;
        b.sort_by_evidence |= flags.sort_evidence;
        b
    }
}

fn run(cli: Cli) -> Result<commands::Output, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = Some(jobs);
    }
    let ctx = Ctx { cfg, json: cli.json };
    match cli.command {
        Command::Corpus(cmd) => commands::corpus::run(&ctx, cmd),
        Command::Tag(args) => commands::pipeline::tag(&ctx, args),
        Command::BuildInputs(args) => commands::pipeline::build_inputs(&ctx, args),
        Command::Summarize(args) => commands::pipeline::summarize(&ctx, args),
        Command::Eval(cmd) => commands::eval::run(&ctx, cmd),
        Command::TrainClassifier(args) => commands::eval::train(&ctx, args),
        Command::Stats(cmd) => commands::stats::run(&ctx, cmd),
        Command::Annotate(cmd) => commands::annotate::run(&ctx, cmd),
        Command::Report(args) => commands::report::run(&ctx, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let json = cli.json;
    match run(cli) {
        Ok(out) => {
            out.print(json);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.category.exit_code())
        }
    }
}
