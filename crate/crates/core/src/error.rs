//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("missing value for feature `{0}`")]
    MissingFeature(String),

    #[error("feature `{feature}` expects a {expected} value, got {found}")]
    KindMismatch {
        feature: String,
        expected: &'static str,
        found: String,
    },

    #[error("feature `{feature}` has no category `{label}`")]
    UnknownCategory { feature: String, label: String },

    #[error("feature `{0}` is not categorical")]
    NotCategorical(String),

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("dataset has no labels")]
    MissingLabels,

    #[error("k = {k} exceeds the number of training rows ({rows})")]
    KTooLarge { k: usize, rows: usize },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("impossible geometry: {0}")]
    ImpossibleGeometry(String),

    #[error("predictor failure: {0}")]
    PredictorFailure(String),

    #[error("curve has no points")]
    EmptyCurve,

    #[error("stability requires an ICE curve restricted to the stability range")]
    UnrestrictedCurve,

    #[error("max and min curves do not share the same index set")]
    MismatchedCurves,

    #[error("unsupported grid artifact version `{0}`")]
    GridVersion(String),

    #[error("data error at {context}: {message}")]
    Data { context: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn data(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Data {
            context: context.into(),
            message: message.into(),
        }
    }
}
