//! MUCE: greedy hill-climbing exploration of the neighbourhood of one
//! observation, tracking the highest and lowest reachable predictions while
//! the feature of interest is stepped across its stability interval.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{validate_observation, FeatureValue, Observation};
use crate::grid::{stability_intervals, ExplanationGrid, StabilityInterval};
use crate::ice::{compute_ice_in, IceCurve, DEFAULT_N_LOCAL};
use crate::predictor::{predict_proba, Predictor};

pub const DEFAULT_N: usize = 10;
pub const DEFAULT_T1: usize = 5;
pub const DEFAULT_TI: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Max,
    Min,
}

impl Method {
    /// Strict improvement of `candidate` over `incumbent`.
    pub fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Method::Max => candidate > incumbent,
            Method::Min => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Plus => 1,
            Direction::Minus => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuceConfig {
    /// Total iterations across both directions (even).
    pub n: usize,
    /// Repetitions per iteration; `nsteps[0]` is t1.
    pub nsteps: Vec<usize>,
    /// Step overrides by feature name; otherwise `delta / (n / 2)`.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub epsilon: IndexMap<String, f64>,
    /// Points of the restricted ICE curve.
    pub n_local: usize,
    /// Random restarts of iteration 0.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MuceConfig {
    fn default() -> Self {
        Self::new(DEFAULT_N, DEFAULT_T1, DEFAULT_TI)
    }
}

impl MuceConfig {
    pub fn new(n: usize, t1: usize, ti: usize) -> Self {
        let mut nsteps = vec![t1];
        nsteps.extend(std::iter::repeat_n(ti, n / 2));
        Self {
            n,
            nsteps,
            epsilon: IndexMap::new(),
            n_local: DEFAULT_N_LOCAL,
            restarts: 0,
            seed: 0,
        }
    }

    pub fn half(&self) -> usize {
        self.n / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !self.n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("N must be even and positive, got {}", self.n)));
        }
        if self.nsteps.len() < self.half() + 1 {
            return Err(Error::InvalidConfig(format!(
                "nsteps needs {} entries, got {}",
                self.half() + 1,
                self.nsteps.len()
            )));
        }
        if self.n_local < 3 {
            return Err(Error::InvalidConfig(format!("n_local must be at least 3, got {}", self.n_local)));
        }
        for (name, eps) in &self.epsilon {
            if !(eps.is_finite() && *eps > 0.0) {
                return Err(Error::InvalidConfig(format!("step for `{name}` must be positive, got {eps}")));
            }
        }
        Ok(())
    }

    /// Upper bound on the number of observations sent to the predictor by
    /// one MUCE run (restricted ICE excluded). `max_candidates` is the
    /// largest candidate set a single step can produce; `positions` is the
    /// number of values explored for an unordered feature of interest.
    pub fn observation_budget(&self, ordered: bool, positions: usize, max_candidates: usize) -> usize {
        let t1 = self.nsteps[0];
        let iteration0 = (1 + self.restarts) * (1 + t1 * max_candidates);
        let per_method = if ordered {
            let later: usize = (1..=self.half())
                .map(|n| 1 + self.nsteps[n] * max_candidates)
                .sum();
            iteration0 + 2 * later
        } else {
            positions * iteration0
        };
        2 * per_method
    }
}

/// Step size per feature: `delta / (N / 2)` unless overridden; integer kinds
/// are rounded with a minimum of 1. Unordered features get 0.
pub fn step_sizes(grid: &ExplanationGrid, config: &MuceConfig) -> Result<Vec<f64>> {
    for name in config.epsilon.keys() {
        grid.schema().require(name)?;
    }
    Ok(grid
        .features()
        .iter()
        .map(|fg| {
            if !fg.kind.is_ordered() {
                return 0.0;
            }
            let eps = config
                .epsilon
                .get(&fg.name)
                .copied()
                .unwrap_or_else(|| fg.delta() / config.half() as f64);
            if fg.kind.is_integral() {
                eps.round().max(1.0)
            } else {
                eps
            }
        })
        .collect())
}

/// Size of the largest candidate set generated around any observation.
pub fn max_candidates(intervals: &[StabilityInterval], exclude: usize) -> usize {
    intervals
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != exclude)
        .map(|(_, iv)| match iv {
            StabilityInterval::Continuous { .. } | StabilityInterval::Discrete { .. } => 2,
            StabilityInterval::Binary => 1,
            StabilityInterval::Categories { labels } => labels.len().saturating_sub(1),
        })
        .sum()
}

/// Neighbours of `x`: each listed feature moved by one step (both signs,
/// clamped into its interval), binary features flipped, categorical features
/// set to each other selected label. Moves that change nothing are dropped.
/// Order: listed feature order, `+` before `-`.
pub fn generate_candidates(
    x: &Observation,
    features: &[usize],
    epsilon: &[f64],
    intervals: &[StabilityInterval],
) -> Vec<Observation> {
    let mut out = Vec::new();
    for &j in features {
        let current = x.get(j);
        match &intervals[j] {
            StabilityInterval::Continuous { lower, upper } => {
                let v = current.as_f64().expect("continuous value");
                for s in [1.0, -1.0] {
                    let c = (v + s * epsilon[j]).clamp(*lower, *upper);
                    if c != v {
                        out.push(x.with(j, FeatureValue::Real(c)));
                    }
                }
            }
            StabilityInterval::Discrete { lower, upper } => {
                let v = current.as_i64().expect("integer value");
                let step = epsilon[j] as i64;
                for s in [1, -1] {
                    let c = (v + s * step).clamp(*lower, *upper);
                    if c != v {
                        out.push(x.with(j, FeatureValue::Int(c)));
                    }
                }
            }
            StabilityInterval::Binary => {
                let v = current.as_i64().expect("binary value");
                out.push(x.with(j, FeatureValue::Int(1 - v)));
            }
            StabilityInterval::Categories { labels } => {
                for label in labels {
                    if current.as_label() != Some(label) {
                        out.push(x.with(j, FeatureValue::Label(label.clone())));
                    }
                }
            }
        }
    }
    out
}

/// Value of the feature of interest at signed iteration `index`.
pub fn shifted_value(interval: &StabilityInterval, own: &FeatureValue, epsilon: f64, index: i64) -> FeatureValue {
    match interval {
        StabilityInterval::Continuous { lower, upper } => {
            let v = own.as_f64().expect("continuous value");
            FeatureValue::Real((v + index as f64 * epsilon).clamp(*lower, *upper))
        }
        StabilityInterval::Discrete { lower, upper } => {
            let v = own.as_i64().expect("integer value");
            FeatureValue::Int((v + index * epsilon as i64).clamp(*lower, *upper))
        }
        _ => own.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MucePoint {
    /// Signed iteration index for ordered features; position for unordered ones.
    pub index: i64,
    /// Value of the feature of interest.
    pub value: FeatureValue,
    pub observation: Observation,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuceCurve {
    pub points: Vec<MucePoint>,
}

impl MuceCurve {
    pub fn predictions(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.prediction)
    }

    pub fn at(&self, index: i64) -> Option<&MucePoint> {
        self.points.iter().find(|p| p.index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extremal {
    pub index: i64,
    pub observation: Observation,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuceResult {
    pub feature: String,
    /// Whether the feature of interest is explored along a signed axis.
    pub ordered: bool,
    /// Step of the feature of interest (ordered features).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub max_curve: MuceCurve,
    pub min_curve: MuceCurve,
    pub ice_restricted: IceCurve,
    pub extremal_max: Extremal,
    pub extremal_min: Extremal,
}

impl MuceResult {
    pub fn extremal(&self, which: Method) -> &Extremal {
        match which {
            Method::Max => &self.extremal_max,
            Method::Min => &self.extremal_min,
        }
    }
}

fn mix_seed(seed: u64, feature: usize, method: Method, position: usize) -> u64 {
    let m = match method {
        Method::Max => 1u64,
        Method::Min => 2u64,
    };
    seed ^ (feature as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ m.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ (position as u64 + 1).wrapping_mul(0x94D0_49BB_1331_11EB)
}

struct Explorer<'a, P: ?Sized> {
    model: &'a P,
    intervals: &'a [StabilityInterval],
    epsilon: &'a [f64],
    others: Vec<usize>,
    config: &'a MuceConfig,
    feature: usize,
}

impl<P: Predictor + ?Sized> Explorer<'_, P> {
    fn predict_one(&self, obs: &Observation) -> Result<f64> {
        Ok(predict_proba(self.model, std::slice::from_ref(obs))?[0])
    }

    /// Up to `reps` greedy moves from `best`, each accepted only on strict
    /// improvement; the earliest candidate wins ties.
    fn climb(&self, mut best: Observation, mut best_pred: f64, reps: usize, method: Method) -> Result<(Observation, f64)> {
        for _ in 0..reps {
            let candidates = generate_candidates(&best, &self.others, self.epsilon, self.intervals);
            if candidates.is_empty() {
                break;
            }
            let preds = predict_proba(self.model, &candidates)?;
            let mut k = 0;
            for i in 1..preds.len() {
                if method.better(preds[i], preds[k]) {
                    k = i;
                }
            }
            if !method.better(preds[k], best_pred) {
                break;
            }
            best_pred = preds[k];
            best = candidates.into_iter().nth(k).expect("index in range");
        }
        Ok((best, best_pred))
    }

    fn random_start(&self, around: &Observation, rng: &mut ChaCha8Rng) -> Observation {
        let mut obs = around.clone();
        for &j in &self.others {
            let value = match &self.intervals[j] {
                StabilityInterval::Continuous { lower, upper } => {
                    FeatureValue::Real(if lower < upper { rng.gen_range(*lower..=*upper) } else { *lower })
                }
                StabilityInterval::Discrete { lower, upper } => FeatureValue::Int(rng.gen_range(*lower..=*upper)),
                StabilityInterval::Binary => FeatureValue::Int(rng.gen_range(0..=1)),
                StabilityInterval::Categories { labels } => {
                    FeatureValue::Label(labels[rng.gen_range(0..labels.len())].clone())
                }
            };
            obs.set(j, value);
        }
        obs
    }

    /// Iteration-0 exploration from `start` with t1 repetitions, plus the
    /// configured random restarts (adopted only when strictly better).
    fn explore_at(&self, start: &Observation, method: Method, position: usize) -> Result<(Observation, f64)> {
        let t1 = self.config.nsteps[0];
        let pred = self.predict_one(start)?;
        let mut best = self.climb(start.clone(), pred, t1, method)?;
        if self.config.restarts > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, self.feature, method, position));
            for _ in 0..self.config.restarts {
                let s = self.random_start(start, &mut rng);
                let p = self.predict_one(&s)?;
                let candidate = self.climb(s, p, t1, method)?;
                if method.better(candidate.1, best.1) {
                    best = candidate;
                }
            }
        }
        Ok(best)
    }

    fn search(&self, x: &Observation, method: Method, direction: Direction, start: (Observation, f64)) -> Result<Vec<MucePoint>> {
        let own = x.get(self.feature);
        let mut current = start.0;
        let mut out = Vec::with_capacity(self.config.half());
        for n in 1..=self.config.half() {
            let index = direction.sign() * n as i64;
            let value = shifted_value(&self.intervals[self.feature], own, self.epsilon[self.feature], index);
            current.set(self.feature, value.clone());
            let shifted = self.predict_one(&current)?;
            let (best, pred) = self.climb(current, shifted, self.config.nsteps[n], method)?;
            current = best;
            out.push(MucePoint {
                index,
                value,
                observation: current.clone(),
                prediction: pred,
            });
        }
        Ok(out)
    }
}

/// One direction of the search for iterations `1..=N/2`, continuing from the
/// shared iteration-0 result `start`.
#[allow(clippy::too_many_arguments)]
pub fn muce_search<P: Predictor + ?Sized>(
    x: &Observation,
    feature: usize,
    method: Method,
    direction: Direction,
    config: &MuceConfig,
    model: &P,
    intervals: &[StabilityInterval],
    epsilon: &[f64],
    start: (Observation, f64),
) -> Result<Vec<MucePoint>> {
    config.validate()?;
    let explorer = Explorer {
        model,
        intervals,
        epsilon,
        others: (0..intervals.len()).filter(|&j| j != feature).collect(),
        config,
        feature,
    };
    explorer.search(x, method, direction, start)
}

/// First strict extremum, scanning `order`.
fn pick_extremal(curve: &MuceCurve, order: &[usize], method: Method) -> Extremal {
    let mut best = order[0];
    for &i in &order[1..] {
        if method.better(curve.points[i].prediction, curve.points[best].prediction) {
            best = i;
        }
    }
    let p = &curve.points[best];
    Extremal {
        index: p.index,
        observation: p.observation.clone(),
        prediction: p.prediction,
    }
}

pub fn compute_muce<P: Predictor + ?Sized>(
    grid: &ExplanationGrid,
    x: &Observation,
    feature: &str,
    model: &P,
    config: &MuceConfig,
) -> Result<MuceResult> {
    config.validate()?;
    let x = validate_observation(x.clone(), grid.schema())?;
    let idx = grid.schema().require(feature)?;
    let intervals = stability_intervals(grid, &x)?;
    let epsilon = step_sizes(grid, config)?;
    compute_muce_in(&x, idx, feature, &intervals, &epsilon, model, config)
}

/// MUCE for feature `idx` with precomputed intervals and steps; `x` must
/// already be validated.
pub fn compute_muce_in<P: Predictor + ?Sized>(
    x: &Observation,
    idx: usize,
    feature: &str,
    intervals: &[StabilityInterval],
    epsilon: &[f64],
    model: &P,
    config: &MuceConfig,
) -> Result<MuceResult> {
    config.validate()?;
    let explorer = Explorer {
        model,
        intervals,
        epsilon,
        others: (0..intervals.len()).filter(|&j| j != idx).collect(),
        config,
        feature: idx,
    };
    let interval = &intervals[idx];
    let ordered = matches!(
        interval,
        StabilityInterval::Continuous { .. } | StabilityInterval::Discrete { .. }
    );
    let own = x.get(idx);

    let mut curves = Vec::with_capacity(2);
    let mut scan = Vec::new();
    for method in [Method::Max, Method::Min] {
        let mut points = Vec::new();
        if ordered {
            let (b0, p0) = explorer.explore_at(x, method, 0)?;
            let plus = explorer.search(x, method, Direction::Plus, (b0.clone(), p0))?;
            let minus = explorer.search(x, method, Direction::Minus, (b0.clone(), p0))?;
            points.extend(minus.into_iter().rev());
            points.push(MucePoint {
                index: 0,
                value: own.clone(),
                observation: b0,
                prediction: p0,
            });
            points.extend(plus);
        } else {
            for (pos, value) in interval.positions().into_iter().enumerate() {
                let start = x.with(idx, value.clone());
                let (b, p) = explorer.explore_at(&start, method, pos)?;
                points.push(MucePoint {
                    index: pos as i64,
                    value,
                    observation: b,
                    prediction: p,
                });
            }
        }
        curves.push(MuceCurve { points });
    }
    let min_curve = curves.pop().expect("two curves");
    let max_curve = curves.pop().expect("two curves");

    // scan order: the observation's own position first, then outwards
    if ordered {
        let half = config.half();
        scan.push(half);
        for n in 1..=half {
            scan.push(half - n);
            scan.push(half + n);
        }
    } else {
        let home = max_curve
            .points
            .iter()
            .position(|p| &p.value == own)
            .unwrap_or(0);
        scan.push(home);
        scan.extend((0..max_curve.points.len()).filter(|&i| i != home));
    }

    let ice_restricted = compute_ice_in(x, idx, feature, interval, model, config.n_local)?;
    Ok(MuceResult {
        feature: feature.to_string(),
        ordered,
        epsilon: ordered.then(|| epsilon[idx]),
        extremal_max: pick_extremal(&max_curve, &scan, Method::Max),
        extremal_min: pick_extremal(&min_curve, &scan, Method::Min),
        max_curve,
        min_curve,
        ice_restricted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum FeatureChange {
    Unchanged,
    /// Continuous shift; `x + delta` reproduces the target bit for bit.
    Shift { delta: f64 },
    /// Continuous target with no bit-exact delta from `x` (large cancellation).
    Set { value: f64 },
    /// Integer, ordinal or binary step.
    Step { delta: i64 },
    Replace { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationEntry {
    pub feature: String,
    pub change: FeatureChange,
}

/// Per-feature changes turning the original observation into an extremal one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVariation {
    pub entries: Vec<VariationEntry>,
}

/// A delta `d` with `x + d == target` exactly, when one exists near `target - x`.
fn exact_delta(x: f64, target: f64) -> Option<f64> {
    let mut d = target - x;
    for _ in 0..64 {
        let y = x + d;
        if y == target {
            return Some(d);
        }
        d = if y < target { d.next_up() } else { d.next_down() };
    }
    None
}

impl FeatureVariation {
    pub fn between(names: &[String], from: &Observation, to: &Observation) -> Self {
        let entries = names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let change = match (from.get(j), to.get(j)) {
                    (a, b) if a == b => FeatureChange::Unchanged,
                    (FeatureValue::Real(a), FeatureValue::Real(b)) => match exact_delta(*a, *b) {
                        Some(delta) => FeatureChange::Shift { delta },
                        None => FeatureChange::Set { value: *b },
                    },
                    (FeatureValue::Int(a), FeatureValue::Int(b)) => FeatureChange::Step { delta: b - a },
                    (a, b) => FeatureChange::Replace {
                        from: a.to_string(),
                        to: b.to_string(),
                    },
                };
                VariationEntry {
                    feature: name.clone(),
                    change,
                }
            })
            .collect();
        Self { entries }
    }

    pub fn apply(&self, x: &Observation) -> Observation {
        let mut out = x.clone();
        for (j, entry) in self.entries.iter().enumerate() {
            let value = match (&entry.change, x.get(j)) {
                (FeatureChange::Unchanged, v) => v.clone(),
                (FeatureChange::Shift { delta }, FeatureValue::Real(v)) => FeatureValue::Real(v + delta),
                (FeatureChange::Set { value }, _) => FeatureValue::Real(*value),
                (FeatureChange::Step { delta }, FeatureValue::Int(v)) => FeatureValue::Int(v + delta),
                (FeatureChange::Replace { to, .. }, _) => FeatureValue::Label(to.clone()),
                (_, v) => v.clone(),
            };
            out.set(j, value);
        }
        out
    }
}

pub fn extract_feature_variation(result: &MuceResult, x: &Observation, names: &[String], which: Method) -> FeatureVariation {
    FeatureVariation::between(names, x, &result.extremal(which).observation)
}
