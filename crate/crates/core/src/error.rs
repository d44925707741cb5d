use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: invalid UTF-8", path.display())]
    InvalidUtf8 { path: PathBuf, line: usize },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("corpus has zero documents")]
    EmptyCorpus,

    #[error("corpus is already stemmed")]
    AlreadyStemmed,

    #[error("labeling has {found} entries but the corpus has {expected} documents")]
    LabelLengthMismatch { expected: usize, found: usize },

    #[error("label {value} at document {index} is not one of -1, 0, 1")]
    InvalidLabel { index: usize, value: i64 },

    #[error("degenerate labeling: {positives} positive and {negatives} negative documents")]
    DegenerateLabeling { positives: usize, negatives: usize },

    #[error("feature has an all-zero count vector")]
    VacuousFeature,

    #[error("mean prediction {mu} must be below 1")]
    DegenerateMean { mu: f64 },

    #[error("invalid phrase '{0}'")]
    InvalidPhrase(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("model stemming ({model}) does not match corpus stemming ({corpus})")]
    StemmingMismatch {
        model: &'static str,
        corpus: &'static str,
    },

    #[error("model '{0}' was fit on a different corpus")]
    CorpusMismatch(String),

    #[error("evaluation needs both classes in the true labels")]
    SingleClassTruth,

    #[error("fold {fold} is missing a class")]
    FoldMissingClass { fold: usize },
}

impl Error {
    /// Short stable identifier for the error kind, used in machine-readable
    /// diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::InvalidUtf8 { .. } => "invalid_utf8",
            Error::Parse { .. } => "parse",
            Error::EmptyCorpus => "empty_corpus",
            Error::AlreadyStemmed => "already_stemmed",
            Error::LabelLengthMismatch { .. } => "length_mismatch",
            Error::InvalidLabel { .. } => "invalid_value",
            Error::DegenerateLabeling { .. } => "degenerate_labeling",
            Error::VacuousFeature => "vacuous_feature",
            Error::DegenerateMean { .. } => "degenerate_mean",
            Error::InvalidPhrase(_) => "invalid_phrase",
            Error::InvalidConfig(_) => "invalid_config",
            Error::StemmingMismatch { .. } => "stemming_mismatch",
            Error::CorpusMismatch(_) => "corpus_mismatch",
            Error::SingleClassTruth => "single_class_truth",
            Error::FoldMissingClass { .. } => "fold_missing_class",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
