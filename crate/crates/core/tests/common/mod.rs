#![allow(dead_code)]

use std::sync::Mutex;

use muce::grid::{stability_intervals, StabilityInterval};
use muce::muce::{compute_muce, step_sizes, FeatureVariation, Method};
use muce::predictor::sigmoid;
use muce::{
    Dataset, ExplanationGrid, FeatureKind, FeatureSpec, FeatureValue, MuceConfig, MuceResult,
    Observation, Predictor, Result, Schema,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const ALL_KINDS: [FeatureKind; 5] = [
    FeatureKind::Continuous,
    FeatureKind::Integer,
    FeatureKind::Binary,
    FeatureKind::Ordinal,
    FeatureKind::Categorical,
];

pub fn random_spec(rng: &mut ChaCha8Rng, j: usize, kind: FeatureKind) -> FeatureSpec {
    let name = format!("f{j}");
    match kind {
        FeatureKind::Continuous => FeatureSpec::continuous(name),
        FeatureKind::Integer => FeatureSpec::integer(name),
        FeatureKind::Binary => FeatureSpec::binary(name),
        FeatureKind::Ordinal => FeatureSpec::ordinal(name, 0, rng.gen_range(2..=6)),
        FeatureKind::Categorical => {
            let n = rng.gen_range(2..=6);
            FeatureSpec::categorical(name, (0..n).map(|c| format!("c{c}")))
        }
    }
}

pub fn random_schema(rng: &mut ChaCha8Rng, n_features: usize, kinds: &[FeatureKind]) -> Schema {
    let specs = (0..n_features)
        .map(|j| {
            let kind = *kinds.choose(rng).unwrap();
            random_spec(rng, j, kind)
        })
        .collect();
    Schema::new(specs).unwrap()
}

/// Rows spread over a random range per feature; every label of every
/// categorical feature occurs at least once.
pub fn random_dataset(rng: &mut ChaCha8Rng, schema: &Schema, n_rows: usize) -> Dataset {
    let ranges: Vec<(f64, f64)> = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Continuous => {
                let lo = rng.gen_range(-5.0..5.0);
                (lo, lo + rng.gen_range(0.5..20.0))
            }
            FeatureKind::Integer => {
                let lo = rng.gen_range(-10..10) as f64;
                (lo, lo + rng.gen_range(2..60) as f64)
            }
            _ => (0.0, 0.0),
        })
        .collect();
    let rows = (0..n_rows)
        .map(|r| {
            let values = schema
                .features()
                .iter()
                .zip(&ranges)
                .map(|(f, &(lo, hi))| match f.kind {
                    FeatureKind::Continuous => FeatureValue::Real(if r == 0 {
                        lo
                    } else if r == 1 {
                        hi
                    } else {
                        rng.gen_range(lo..=hi)
                    }),
                    FeatureKind::Integer => FeatureValue::Int(if r == 0 {
                        lo as i64
                    } else if r == 1 {
                        hi as i64
                    } else {
                        rng.gen_range(lo as i64..=hi as i64)
                    }),
                    FeatureKind::Binary => FeatureValue::Int(if r < 2 { r as i64 } else { rng.gen_range(0..=1) }),
                    FeatureKind::Ordinal => {
                        let (a, b) = f.levels.unwrap();
                        FeatureValue::Int(rng.gen_range(a..=b))
                    }
                    FeatureKind::Categorical => {
                        let c = if r < f.categories.len() { r } else { rng.gen_range(0..f.categories.len()) };
                        FeatureValue::Label(f.categories[c].clone())
                    }
                })
                .collect();
            Observation::new(values)
        })
        .collect();
    let labels = (0..n_rows).map(|_| rng.gen_range(0..=1)).collect();
    Dataset::new(schema.clone(), rows, Some(labels)).unwrap()
}

/// A training row, or a fresh point inside the observed ranges.
pub fn random_observation(rng: &mut ChaCha8Rng, data: &Dataset) -> Observation {
    if rng.gen_bool(0.5) {
        return data.rows()[rng.gen_range(0..data.len())].clone();
    }
    let values = data
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(j, f)| match f.kind {
            FeatureKind::Continuous => {
                let (lo, hi) = data.observed_range(j).unwrap();
                FeatureValue::Real(rng.gen_range(lo..=hi))
            }
            FeatureKind::Integer | FeatureKind::Ordinal => {
                let (lo, hi) = data.observed_range(j).unwrap();
                FeatureValue::Int(rng.gen_range(lo as i64..=hi as i64))
            }
            FeatureKind::Binary => FeatureValue::Int(rng.gen_range(0..=1)),
            FeatureKind::Categorical => FeatureValue::Label(f.categories.choose(rng).unwrap().clone()),
        })
        .collect();
    Observation::new(values)
}

/// One additive term of [`PiecewiseModel`].
#[derive(Debug, Clone)]
pub enum Term {
    /// Piecewise linear through `(knots[i], values[i])`, linear beyond the ends.
    Linear { knots: Vec<f64>, values: Vec<f64> },
    /// Lookup by binary value or label index.
    Table { labels: Vec<String>, values: Vec<f64> },
}

impl Term {
    pub fn eval(&self, v: &FeatureValue) -> f64 {
        match self {
            Term::Linear { knots, values } => {
                let x = v.as_f64().expect("numeric value");
                let n = knots.len();
                let seg = knots[1..n - 1].iter().take_while(|k| x > **k).count();
                let (x0, x1, y0, y1) = (knots[seg], knots[seg + 1], values[seg], values[seg + 1]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
            Term::Table { labels, values } => match v {
                FeatureValue::Label(l) => values[labels.iter().position(|c| c == l).expect("known label")],
                other => values[other.as_i64().expect("binary value") as usize],
            },
        }
    }
}

/// `sigmoid(bias + sum of terms + coupling * t_a * t_b)`.
#[derive(Debug, Clone)]
pub struct PiecewiseModel {
    pub bias: f64,
    pub terms: Vec<Term>,
    pub coupling: Option<(usize, usize, f64)>,
}

impl PiecewiseModel {
    /// Random continuous piecewise-linear terms, optionally with a pairwise
    /// product term.
    pub fn random(rng: &mut ChaCha8Rng, data: &Dataset, interaction: bool) -> Self {
        Self::build(rng, data, false, interaction)
    }

    /// Strictly monotone in every numeric feature (direction drawn per
    /// feature), distinct table entries elsewhere, no interaction.
    pub fn monotone(rng: &mut ChaCha8Rng, data: &Dataset) -> Self {
        Self::build(rng, data, true, false)
    }

    fn build(rng: &mut ChaCha8Rng, data: &Dataset, monotone: bool, interaction: bool) -> Self {
        let schema = data.schema();
        let terms: Vec<Term> = schema
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| match f.kind {
                FeatureKind::Binary | FeatureKind::Categorical => {
                    let labels = if f.kind == FeatureKind::Binary { Vec::new() } else { f.categories.clone() };
                    let n = if f.kind == FeatureKind::Binary { 2 } else { labels.len() };
                    let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
                    if monotone {
                        // distinct entries, so every move changes the output
                        values = (0..n).map(|i| i as f64 * 0.37 - 0.5).collect();
                        values.shuffle(rng);
                    }
                    Term::Table { labels, values }
                }
                _ => {
                    let (lo, hi) = data.observed_range(j).unwrap();
                    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
                    let k = rng.gen_range(2..=6);
                    let mut inner: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
                    inner.sort_by(f64::total_cmp);
                    inner.dedup();
                    let mut knots = vec![lo - 1.0];
                    knots.extend(inner.into_iter().filter(|v| *v > lo && *v < hi));
                    knots.push(hi + 1.0);
                    let values = if monotone {
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        let mut acc = rng.gen_range(-1.0..1.0);
                        knots
                            .iter()
                            .map(|_| {
                                acc += rng.gen_range(0.1..1.0);
                                sign * acc
                            })
                            .collect()
                    } else {
                        knots.iter().map(|_| rng.gen_range(-2.0..2.0)).collect()
                    };
                    Term::Linear { knots, values }
                }
            })
            .collect();
        let coupling = (interaction && terms.len() >= 2).then(|| {
            let a = rng.gen_range(0..terms.len());
            let b = (a + rng.gen_range(1..terms.len())) % terms.len();
            (a, b, rng.gen_range(-1.0..1.0))
        });
        Self {
            bias: rng.gen_range(-0.5..0.5),
            terms,
            coupling,
        }
    }

    pub fn probability(&self, x: &Observation) -> f64 {
        let t: Vec<f64> = self.terms.iter().zip(x.values()).map(|(term, v)| term.eval(v)).collect();
        let mut s = self.bias + t.iter().sum::<f64>();
        if let Some((a, b, c)) = self.coupling {
            s += c * t[a] * t[b];
        }
        sigmoid(s)
    }
}

impl Predictor for PiecewiseModel {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        Ok(batch.iter().map(|x| self.probability(x)).collect())
    }

    fn describe(&self) -> String {
        "piecewise".into()
    }
}

/// Remembers every observation it is asked about.
pub struct Recorder<P> {
    pub inner: P,
    pub seen: Mutex<Vec<Observation>>,
}

impl<P> Recorder<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn take(&self) -> Vec<Observation> {
        std::mem::take(&mut *self.seen.lock().unwrap())
    }
}

impl<P: Predictor> Predictor for Recorder<P> {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        self.seen.lock().unwrap().extend_from_slice(batch);
        self.inner.predict_proba(batch)
    }

    fn concurrent_safe(&self) -> bool {
        self.inner.concurrent_safe()
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}

/// Every value the clamped `±eps` walk can reach from `own`: the three
/// arithmetic ladders anchored at `own`, `lower` and `upper`.
pub fn lattice(interval: &StabilityInterval, own: &FeatureValue, eps: f64) -> Vec<FeatureValue> {
    match interval {
        StabilityInterval::Continuous { lower, upper } => {
            let x = own.as_f64().unwrap();
            let reach = ((upper - lower) / eps).ceil() as i64 + 2;
            let mut out = vec![*lower, *upper];
            for m in -reach..=reach {
                for anchor in [x, *lower, *upper] {
                    let v = anchor + m as f64 * eps;
                    if *lower <= v && v <= *upper {
                        out.push(v);
                    }
                }
            }
            out.sort_by(f64::total_cmp);
            out.dedup();
            out.into_iter().map(FeatureValue::Real).collect()
        }
        StabilityInterval::Discrete { lower, upper } => {
            let x = own.as_i64().unwrap();
            let step = eps as i64;
            let reach = (upper - lower) / step + 2;
            let mut out = vec![*lower, *upper];
            for m in -reach..=reach {
                for anchor in [x, *lower, *upper] {
                    let v = anchor + m * step;
                    if *lower <= v && v <= *upper {
                        out.push(v);
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out.into_iter().map(FeatureValue::Int).collect()
        }
        StabilityInterval::Binary => vec![FeatureValue::Int(0), FeatureValue::Int(1)],
        StabilityInterval::Categories { labels } => labels.iter().cloned().map(FeatureValue::Label).collect(),
    }
}

/// Exhaustive (max, min) over the reachable lattice of every feature except
/// `feature`, which is pinned to `pinned`.
pub fn exhaustive_extremes<P: Predictor>(
    x: &Observation,
    feature: usize,
    pinned: &FeatureValue,
    intervals: &[StabilityInterval],
    epsilon: &[f64],
    model: &P,
) -> (f64, f64) {
    let mut batch = vec![x.with(feature, pinned.clone())];
    for (j, iv) in intervals.iter().enumerate() {
        if j == feature {
            continue;
        }
        let values = lattice(iv, x.get(j), epsilon[j]);
        batch = batch
            .iter()
            .flat_map(|obs| values.iter().map(move |v| obs.with(j, v.clone())))
            .collect();
    }
    let preds = model.predict_proba(&batch).unwrap();
    preds.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &p| (hi.max(p), lo.min(p)))
}

/// Value of the feature of interest at signed index `n` (ordered kinds).
pub fn pinned_value(interval: &StabilityInterval, own: &FeatureValue, eps: f64, n: i64) -> FeatureValue {
    match interval {
        StabilityInterval::Continuous { lower, upper } => {
            FeatureValue::Real((own.as_f64().unwrap() + n as f64 * eps).max(*lower).min(*upper))
        }
        StabilityInterval::Discrete { lower, upper } => {
            FeatureValue::Int((own.as_i64().unwrap() + n * eps as i64).max(*lower).min(*upper))
        }
        _ => own.clone(),
    }
}

/// Candidate-set size per feature when it is not the feature of interest.
pub fn candidates_of(interval: &StabilityInterval) -> usize {
    match interval {
        StabilityInterval::Continuous { .. } | StabilityInterval::Discrete { .. } => 2,
        StabilityInterval::Binary => 1,
        StabilityInterval::Categories { labels } => labels.len() - 1,
    }
}

/// Observation budget of one MUCE run, written out from the search
/// definition (restricted ICE excluded).
pub fn budget(config: &MuceConfig, intervals: &[StabilityInterval], feature: usize) -> usize {
    let c: usize = intervals
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != feature)
        .map(|(_, iv)| candidates_of(iv))
        .sum();
    let t1 = config.nsteps[0];
    let start = (1 + config.restarts) * (1 + t1 * c);
    let per_method = match &intervals[feature] {
        StabilityInterval::Continuous { .. } | StabilityInterval::Discrete { .. } => {
            let mut later = 0;
            for n in 1..=config.n / 2 {
                later += 1 + config.nsteps[n] * c;
            }
            start + 2 * later
        }
        iv => iv.positions().len() * start,
    };
    2 * per_method
}

#[derive(Debug, Default)]
pub struct Audit {
    pub runs: usize,
    pub observations: usize,
    pub outside: usize,
    pub over_budget: usize,
    pub budget_mismatch: usize,
    pub variations: usize,
    pub variation_mismatch: usize,
    pub first_problem: Option<String>,
}

impl Audit {
    fn problem(&mut self, what: String) {
        if self.first_problem.is_none() {
            self.first_problem = Some(what);
        }
    }

    pub fn merge(&mut self, other: Audit) {
        self.runs += other.runs;
        self.observations += other.observations;
        self.outside += other.outside;
        self.over_budget += other.over_budget;
        self.budget_mismatch += other.budget_mismatch;
        self.variations += other.variations;
        self.variation_mismatch += other.variation_mismatch;
        if self.first_problem.is_none() {
            self.first_problem = other.first_problem;
        }
    }

    /// Runs MUCE for `feature` and checks confinement, the observation
    /// budget and the feature-variation round trip.
    pub fn run<P: Predictor>(
        &mut self,
        grid: &ExplanationGrid,
        x: &Observation,
        feature: usize,
        model: &P,
        config: &MuceConfig,
    ) -> MuceResult {
        let recorder = Recorder::new(model);
        let name = grid.schema().feature(feature).name.clone();
        let result = compute_muce(grid, x, &name, &recorder, config).unwrap();
        let seen = recorder.take();
        let intervals = stability_intervals(grid, x).unwrap();
        self.runs += 1;
        self.observations += seen.len();
        for obs in &seen {
            if let Some(j) = (0..intervals.len()).find(|&j| !intervals[j].contains(obs.get(j))) {
                self.outside += 1;
                self.problem(format!("{:?} outside {:?}", obs.get(j), intervals[j]));
            }
        }
        let spent = seen.len() - result.ice_restricted.points.len();
        let allowed = budget(config, &intervals, feature);
        let declared = config.observation_budget(
            result.ordered,
            intervals[feature].positions().len(),
            muce::muce::max_candidates(&intervals, feature),
        );
        if declared != allowed {
            self.budget_mismatch += 1;
            self.problem(format!("declared budget {declared}, expected {allowed}"));
        }
        if spent > allowed {
            self.over_budget += 1;
            self.problem(format!("{spent} observations, budget {allowed}"));
        }
        self.check_variation(grid.schema(), x, &result, model);
        result
    }

    pub fn check_variation<P: Predictor>(&mut self, schema: &Schema, x: &Observation, result: &MuceResult, model: &P) {
        let names: Vec<String> = schema.names().map(str::to_string).collect();
        for method in [Method::Max, Method::Min] {
            let extremal = result.extremal(method);
            let fv = FeatureVariation::between(&names, x, &extremal.observation);
            let moved = fv.apply(x);
            let p = model.predict_proba(std::slice::from_ref(&moved)).unwrap()[0];
            self.variations += 1;
            if p.to_bits() != extremal.prediction.to_bits() || moved != extremal.observation {
                self.variation_mismatch += 1;
                self.problem(format!("variation replays to {p}, extremal {}", extremal.prediction));
            }
        }
    }
}

/// Step sizes as the search uses them.
pub fn steps(grid: &ExplanationGrid, config: &MuceConfig) -> Vec<f64> {
    step_sizes(grid, config).unwrap()
}
