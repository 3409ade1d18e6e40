//! Local confidence indices for black-box binary classifiers: restricted ICE
//! curves, MUCE hill-climbing exploration, stability and uncertainty indices.

pub mod cli;
pub mod error;
pub mod feature;
pub mod grid;
pub mod ice;
pub mod indices;
pub mod io;
pub mod muce;
pub mod plot;
pub mod predictor;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
pub use feature::{Dataset, FeatureKind, FeatureSpec, FeatureValue, Observation, Schema};
pub use grid::{fit_grid, ExplanationGrid, StabilityInterval};
pub use predictor::{predict_proba, Predictor};
pub use ice::{compute_ice, compute_ice_local, IceCurve};
pub use indices::{compute_stability, compute_uncertainty_indices, summarize_observation, ConfidenceIndices};
pub use muce::{compute_muce, MuceConfig, MuceResult};
pub use report::ExplanationReport;
