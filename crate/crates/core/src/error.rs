use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unknown channel `{channel}` (registry: {registry})")]
    UnknownChannel { channel: String, registry: String },

    #[error("invalid config at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("segment width {0} min is not one of 10, 15, 20, 30, 60")]
    DisallowedWidth(u32),

    #[error("feature `{0}` has no observed values in the reference data")]
    MissingReferenceFeature(String),

    #[error("no valid RR intervals")]
    NoValidRr,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("zero-variance target")]
    ZeroVarianceTarget,

    #[error("feature registry mismatch: model expects {expected}, got {actual}")]
    RegistryMismatch { expected: String, actual: String },

    #[error("expected {expected} features, got {actual}")]
    FeatureCount { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("zero variance in paired differences")]
    ZeroVariance,

    #[error("rank-deficient fixed effects")]
    RankDeficient,

    #[error("mixed model did not converge: {0}")]
    NonConvergence(String),

    #[error("need at least {needed} participants, got {got}")]
    TooFewParticipants { needed: usize, got: usize },

    #[error("missing truth file {0}")]
    MissingTruth(PathBuf),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
