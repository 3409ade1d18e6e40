//! Single-observation ICE curves, over the full grid or restricted to the
//! stability interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{validate_observation, FeatureKind, FeatureValue, Observation};
use crate::grid::{interval_at, linspace, round_dedup, ExplanationGrid, NeighborOrdering, StabilityInterval};
use crate::predictor::{predict_proba, Predictor};

pub const DEFAULT_N_LOCAL: usize = 11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcePoint {
    pub value: FeatureValue,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceCurve {
    pub feature: String,
    pub points: Vec<IcePoint>,
    pub observation_value: FeatureValue,
    pub observation_prediction: f64,
    pub restricted: bool,
}

impl IceCurve {
    pub fn predictions(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.prediction)
    }
}

/// Sorted values with `x` inserted; values within a relative hair of `x` are
/// replaced by `x` so the observation is evaluated exactly once.
fn with_observation(mut values: Vec<f64>, x: f64) -> Vec<f64> {
    let span = values
        .iter()
        .fold(0.0f64, |m, v| m.max((v - x).abs()))
        .max(x.abs())
        .max(1.0);
    let tol = span * 1e-12;
    for v in values.iter_mut() {
        if (*v - x).abs() <= tol {
            *v = x;
        }
    }
    values.push(x);
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

fn evaluate<P: Predictor + ?Sized>(
    obs: &Observation,
    idx: usize,
    feature: &str,
    values: Vec<FeatureValue>,
    model: &P,
    restricted: bool,
) -> Result<IceCurve> {
    let batch: Vec<Observation> = values.iter().map(|v| obs.with(idx, v.clone())).collect();
    let preds = predict_proba(model, &batch)?;
    let own = obs.get(idx);
    let at = values
        .iter()
        .position(|v| v == own)
        .expect("observation value is always evaluated");
    Ok(IceCurve {
        feature: feature.to_string(),
        observation_value: own.clone(),
        observation_prediction: preds[at],
        restricted,
        points: values
            .into_iter()
            .zip(preds)
            .map(|(value, prediction)| IcePoint { value, prediction })
            .collect(),
    })
}

/// ICE over the feature's full grid (plus the observation's own value), in
/// one batched predictor call.
pub fn compute_ice<P: Predictor + ?Sized>(
    grid: &ExplanationGrid,
    obs: &Observation,
    feature: &str,
    model: &P,
) -> Result<IceCurve> {
    let obs = validate_observation(obs.clone(), grid.schema())?;
    let idx = grid.schema().require(feature)?;
    let fg = grid.feature(idx);
    let own = obs.get(idx).clone();
    let values = match fg.kind {
        FeatureKind::Continuous => {
            let grid_values: Vec<f64> = fg.values.iter().filter_map(FeatureValue::as_f64).collect();
            with_observation(grid_values, own.as_f64().expect("validated"))
                .into_iter()
                .map(FeatureValue::Real)
                .collect()
        }
        FeatureKind::Integer | FeatureKind::Ordinal => {
            let mut v: Vec<i64> = fg.values.iter().filter_map(FeatureValue::as_i64).collect();
            v.push(own.as_i64().expect("validated"));
            v.sort_unstable();
            v.dedup();
            v.into_iter().map(FeatureValue::Int).collect()
        }
        FeatureKind::Binary | FeatureKind::Categorical => fg.values.clone(),
    };
    evaluate(&obs, idx, feature, values, model, false)
}

/// Values of a restricted sweep: `n_local` evenly spaced points across the
/// interval plus the observation's value.
pub fn local_values(interval: &StabilityInterval, own: &FeatureValue, n_local: usize) -> Vec<FeatureValue> {
    match interval {
        StabilityInterval::Continuous { lower, upper } => {
            with_observation(linspace(*lower, *upper, n_local), own.as_f64().unwrap_or(*lower))
                .into_iter()
                .map(FeatureValue::Real)
                .collect()
        }
        StabilityInterval::Discrete { lower, upper } => {
            let mut v = round_dedup(linspace(*lower as f64, *upper as f64, n_local));
            if let Some(x) = own.as_i64() {
                v.push(x);
            }
            v.sort_unstable();
            v.dedup();
            v.into_iter().map(FeatureValue::Int).collect()
        }
        StabilityInterval::Binary | StabilityInterval::Categories { .. } => interval.positions(),
    }
}

/// ICE restricted to the feature's stability interval.
pub fn compute_ice_local<P: Predictor + ?Sized>(
    grid: &ExplanationGrid,
    obs: &Observation,
    feature: &str,
    model: &P,
    n_local: usize,
) -> Result<IceCurve> {
    let obs = validate_observation(obs.clone(), grid.schema())?;
    let idx = grid.schema().require(feature)?;
    let interval = interval_at(grid, &obs, idx, &NeighborOrdering)?;
    compute_ice_in(&obs, idx, feature, &interval, model, n_local)
}

/// Restricted ICE for a precomputed interval; `obs` must already be validated.
pub fn compute_ice_in<P: Predictor + ?Sized>(
    obs: &Observation,
    idx: usize,
    feature: &str,
    interval: &StabilityInterval,
    model: &P,
    n_local: usize,
) -> Result<IceCurve> {
    if n_local < 3 {
        return Err(Error::InvalidConfig(format!("n_local must be at least 3, got {n_local}")));
    }
    let values = local_values(interval, obs.get(idx), n_local);
    evaluate(obs, idx, feature, values, model, true)
}
