//! Stability and uncertainty indices, and the per-observation summary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{validate_observation, FeatureValue, Observation};
use crate::grid::{stability_intervals, ExplanationGrid};
use crate::ice::IceCurve;
use crate::muce::{compute_muce_in, step_sizes, MuceConfig, MuceResult};
use crate::predictor::Predictor;

/// `1 - (max - min)` of a restricted ICE curve.
pub fn compute_stability(ice: &IceCurve) -> Result<f64> {
    if !ice.restricted {
        return Err(Error::UnrestrictedCurve);
    }
    stability_of(ice.predictions())
}

pub fn stability_of(predictions: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut it = predictions.into_iter();
    let first = it.next().ok_or(Error::EmptyCurve)?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
    Ok(1.0 - (hi - lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub uncertainty: f64,
    pub uncertainty_plus: f64,
    pub uncertainty_minus: f64,
}

/// Uncertainty family from the gaps `d_i = max_i - min_i`.
///
/// Ordered features pass `2h + 1` gaps for indices `-h..=h` (so `N = 2h`):
/// `u = sum(d) / N`, `u+ = sum(d_0..=d_h) / h`, `u- = sum(d_-h..=d_0) / h`.
/// Unordered features pass one gap per position and all three values are the mean.
pub fn uncertainty_from_gaps(gaps: &[f64], ordered: bool) -> Result<Uncertainty> {
    if gaps.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !ordered {
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        return Ok(Uncertainty {
            uncertainty: mean,
            uncertainty_plus: mean,
            uncertainty_minus: mean,
        });
    }
    if gaps.len().is_multiple_of(2) || gaps.len() < 3 {
        return Err(Error::MismatchedCurves);
    }
    let h = gaps.len() / 2;
    let n = (2 * h) as f64;
    Ok(Uncertainty {
        uncertainty: gaps.iter().sum::<f64>() / n,
        uncertainty_plus: gaps[h..].iter().sum::<f64>() / h as f64,
        uncertainty_minus: gaps[..=h].iter().sum::<f64>() / h as f64,
    })
}

fn gaps(result: &MuceResult) -> Result<Vec<f64>> {
    let (max, min) = (&result.max_curve.points, &result.min_curve.points);
    if max.len() != min.len() || max.iter().zip(min).any(|(a, b)| a.index != b.index) {
        return Err(Error::MismatchedCurves);
    }
    Ok(max.iter().zip(min).map(|(a, b)| a.prediction - b.prediction).collect())
}

pub fn compute_uncertainty_indices(result: &MuceResult) -> Result<Uncertainty> {
    uncertainty_from_gaps(&gaps(result)?, result.ordered)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceIndices {
    pub feature: String,
    pub value: FeatureValue,
    pub stability: f64,
    pub uncertainty: f64,
    pub uncertainty_plus: f64,
    pub uncertainty_minus: f64,
    /// Curve indices where the greedy max fell below the greedy min.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negative_gaps: Vec<i64>,
}

pub fn confidence_indices(result: &MuceResult) -> Result<ConfidenceIndices> {
    let u = compute_uncertainty_indices(result)?;
    let negative_gaps = result
        .max_curve
        .points
        .iter()
        .zip(&result.min_curve.points)
        .filter(|(a, b)| a.prediction < b.prediction)
        .map(|(a, _)| a.index)
        .collect();
    Ok(ConfidenceIndices {
        feature: result.feature.clone(),
        value: result.ice_restricted.observation_value.clone(),
        stability: compute_stability(&result.ice_restricted)?,
        uncertainty: u.uncertainty,
        uncertainty_plus: u.uncertainty_plus,
        uncertainty_minus: u.uncertainty_minus,
        negative_gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSummary {
    pub indices: Vec<ConfidenceIndices>,
    pub results: Vec<MuceResult>,
}

/// Restricted ICE, MUCE and the indices for every feature, in schema order.
/// Features run in parallel when the predictor allows it; the output does not
/// depend on scheduling.
pub fn summarize_observation<P: Predictor + ?Sized>(
    grid: &ExplanationGrid,
    obs: &Observation,
    model: &P,
    config: &MuceConfig,
) -> Result<ObservationSummary> {
    config.validate()?;
    let obs = validate_observation(obs.clone(), grid.schema())?;
    let intervals = stability_intervals(grid, &obs)?;
    let epsilon = step_sizes(grid, config)?;
    let names: Vec<&str> = grid.schema().names().collect();
    let run = |j: usize| compute_muce_in(&obs, j, names[j], &intervals, &epsilon, model, config);
    let results: Vec<MuceResult> = if model.concurrent_safe() {
        (0..names.len()).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..names.len()).map(run).collect::<Result<_>>()?
    };
    let indices = results.iter().map(confidence_indices).collect::<Result<_>>()?;
    Ok(ObservationSummary { indices, results })
}
