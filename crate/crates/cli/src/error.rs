use std::fmt;
use std::path::Path;

/// Failure category; each maps to a distinct process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Input,
    Config,
    Remote,
    Compute,
    Io,
    Auth,
}

impl Category {
    pub fn exit_code(self) -> u8 {
        match self {
            Category::Input => 3,
            Category::Config => 4,
            Category::Remote => 5,
            Category::Compute => 6,
            Category::Io => 7,
            Category::Auth => 8,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Category::Input => "input",
            Category::Config => "config",
            Category::Remote => "remote",
            Category::Compute => "compute",
            Category::Io => "io",
            Category::Auth => "auth",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        CliError { category, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(Category::Input, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }

    pub fn compute(message: impl Into<String>) -> Self {
        Self::new(Category::Compute, message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(Category::Io, format!("{}: {err}", path.display()))
    }

    /// Prefixes the message with what was being processed.
    pub fn with_context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.category.label(), self.message)
    }
}

impl From<evsynth::corpus::CorpusError> for CliError {
    fn from(e: evsynth::corpus::CorpusError) -> Self {
        use evsynth::corpus::CorpusError;
        match e {
            CorpusError::Io { .. } => CliError::new(Category::Io, e.to_string()),
            CorpusError::InvalidSplit(_) => CliError::config(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<evsynth::tagger::TaggerError> for CliError {
    fn from(e: evsynth::tagger::TaggerError) -> Self {
        match e {
            evsynth::tagger::TaggerError::Remote(_) => CliError::new(Category::Remote, e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<evsynth::input_builder::BuildError> for CliError {
    fn from(e: evsynth::input_builder::BuildError) -> Self {
        use evsynth::input_builder::BuildError;
        match e {
            BuildError::InvalidConfig(_) => CliError::config(e.to_string()),
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<evsynth::summarizer::SummarizerError> for CliError {
    fn from(e: evsynth::summarizer::SummarizerError) -> Self {
        use evsynth::summarizer::SummarizerError as S;
        let category = match &e {
            S::InvalidParams(_) | S::DuplicateSystem(_) => Category::Config,
            S::Unreachable(_) | S::Status { .. } | S::Decode(_) | S::EmptySummary(_) => Category::Remote,
            S::Build(_) => Category::Input,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<evsynth::metrics::MetricsError> for CliError {
    fn from(e: evsynth::metrics::MetricsError) -> Self {
        use evsynth::metrics::MetricsError as M;
        let category = match &e {
            M::InvalidHyper(_) | M::WrongLabelSpace { .. } => Category::Config,
            M::Io(_) => Category::Io,
            M::SingleLabel(_) | M::UnknownLabel { .. } | M::ModelFile(_) | M::EmptyText | M::InvalidDistribution(_) => {
                Category::Input
            }
        };
        CliError::new(category, e.to_string())
    }
}

impl From<evsynth::stats::StatsError> for CliError {
    fn from(e: evsynth::stats::StatsError) -> Self {
        use evsynth::stats::StatsError as S;
        let category = match &e {
            S::InvalidRatings(_) | S::LengthMismatch(..) | S::TooFew { .. } | S::NonFinite => Category::Input,
            S::UndefinedKappa | S::DegenerateVariance | S::ConstantPredictor => Category::Compute,
        };
        CliError::new(category, e.to_string())
    }
}

impl From<evsynth_annotate::AnnotateError> for CliError {
    fn from(e: evsynth_annotate::AnnotateError) -> Self {
        use evsynth_annotate::AnnotateError as A;
        let category = match &e {
            A::Unauthorized | A::InvalidSession | A::UnknownAnnotator(_) => Category::Auth,
            A::Config(_) => Category::Config,
            A::Io(_) => Category::Io,
            _ => Category::Input,
        };
        CliError::new(category, e.to_string())
    }
}
