//! Pieces of the command-line tool that are worth testing on their own:
//! model specifications and error categories.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature::{Dataset, Schema};
use crate::predictor::{
    fit_knn_predictor, AnalyticBoundaryPredictor, ConstantPredictor, Predictor, ProcessPredictor,
    DEFAULT_SHARPNESS,
};
use crate::synth::{CrossGeometry, EllipsoidGeometry};

/// A parsed `--model` value.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Constant(f64),
    Cross { sharpness: f64 },
    Ellipsoid { sharpness: f64 },
    Knn { k: usize },
    Exec { program: String, args: Vec<String> },
}

impl ModelSpec {
    /// `constant:P`, `cross[:S]`, `ellipsoid[:S]`, `knn:K`, `exec:COMMAND ARGS...`
    pub fn parse(spec: &str) -> Result<Self> {
        let (head, rest) = match spec.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (spec, None),
        };
        let bad = |why: &str| Error::InvalidConfig(format!("model `{spec}`: {why}"));
        let number = |r: Option<&str>| -> Result<Option<f64>> {
            r.map(|r| r.trim().parse::<f64>().map_err(|_| bad("expected a number")))
                .transpose()
        };
        match head.trim() {
            "constant" => {
                let p = number(rest)?.ok_or_else(|| bad("missing probability"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad("probability outside [0, 1]"));
                }
                Ok(ModelSpec::Constant(p))
            }
            "cross" => Ok(ModelSpec::Cross {
                sharpness: number(rest)?.unwrap_or(DEFAULT_SHARPNESS),
            }),
            "ellipsoid" => Ok(ModelSpec::Ellipsoid {
                sharpness: number(rest)?.unwrap_or(DEFAULT_SHARPNESS),
            }),
            "knn" => {
                let k = rest
                    .and_then(|r| r.trim().parse::<usize>().ok())
                    .ok_or_else(|| bad("expected knn:K"))?;
                Ok(ModelSpec::Knn { k })
            }
            "exec" => {
                let mut words = rest.unwrap_or("").split_whitespace().map(str::to_string);
                let program = words.next().ok_or_else(|| bad("missing command"))?;
                Ok(ModelSpec::Exec {
                    program,
                    args: words.collect(),
                })
            }
            _ => Err(bad("unknown model kind")),
        }
    }

    pub fn build(&self, schema: &Schema, train: Option<&Dataset>) -> Result<Box<dyn Predictor>> {
        Ok(match self {
            ModelSpec::Constant(p) => Box::new(ConstantPredictor(*p)),
            ModelSpec::Cross { sharpness } => {
                Box::new(AnalyticBoundaryPredictor::cross(CrossGeometry::default(), *sharpness))
            }
            ModelSpec::Ellipsoid { sharpness } => {
                Box::new(AnalyticBoundaryPredictor::ellipsoid(EllipsoidGeometry::default(), *sharpness))
            }
            ModelSpec::Knn { k } => {
                let train = train.ok_or_else(|| {
                    Error::InvalidConfig("knn model needs training data (--train)".into())
                })?;
                if train.schema() != schema {
                    return Err(Error::SchemaMismatch(
                        "training data schema differs from the grid schema".into(),
                    ));
                }
                Box::new(fit_knn_predictor(train, *k)?)
            }
            ModelSpec::Exec { program, args } => {
                Box::new(ProcessPredictor::new(program.clone(), args.clone(), schema.clone()))
            }
        })
    }
}

/// Machine-readable failure class, with its process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    Usage,
    BadGrid,
    BadData,
    BadObservation,
    BadModel,
    PredictorFailure,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 2,
            ErrorCategory::BadGrid
            | ErrorCategory::BadData
            | ErrorCategory::BadObservation
            | ErrorCategory::Io => 3,
            ErrorCategory::BadModel | ErrorCategory::PredictorFailure => 4,
        }
    }
}

/// An error tagged with the stage that produced it.
#[derive(Debug)]
pub struct CliError {
    pub category: ErrorCategory,
    pub error: Error,
}

impl CliError {
    pub fn new(category: ErrorCategory, error: Error) -> Self {
        // a failing predictor is reported as such whatever the stage
        let category = match error {
            Error::PredictorFailure(_) => ErrorCategory::PredictorFailure,
            _ => category,
        };
        Self { category, error }
    }

    /// One JSON line: `{"error":"bad-grid","message":"..."}`
    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": self.category,
            "message": self.error.to_string(),
        })
        .to_string()
    }
}

pub trait Tag<T> {
    fn tag(self, category: ErrorCategory) -> std::result::Result<T, CliError>;
}

impl<T> Tag<T> for Result<T> {
    fn tag(self, category: ErrorCategory) -> std::result::Result<T, CliError> {
        self.map_err(|e| CliError::new(category, e))
    }
}
