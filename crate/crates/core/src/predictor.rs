//! Black-box prediction contract and reference predictors.
//!
//! Explanations only need `predict_proba` access to a binary classifier. The
//! analytic and k-NN predictors here let the whole pipeline run without an
//! external ML framework; [`ProcessPredictor`] wraps any model behind a
//! child-process CSV protocol.

use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::feature::{encode_into, Dataset, FeatureValue, Observation, Scaling, Schema};
use crate::synth::{CrossGeometry, EllipsoidGeometry};

/// A binary classifier returning the a posteriori probability of the positive class.
///
/// Implementations must be deterministic. When [`Predictor::concurrent_safe`]
/// is false the explanation engine issues calls sequentially.
pub trait Predictor: Send + Sync {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>>;

    fn concurrent_safe(&self) -> bool {
        true
    }

    /// Identifier echoed into reports.
    fn describe(&self) -> String;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        (**self).predict_proba(batch)
    }

    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        (**self).predict_proba(batch)
    }

    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Calls the model and enforces the output contract: one finite probability
/// in [0, 1] per observation.
pub fn predict_proba<P: Predictor + ?Sized>(model: &P, batch: &[Observation]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let out = model
        .predict_proba(batch)
        .map_err(|e| match e {
            Error::PredictorFailure(msg) => {
                Error::PredictorFailure(format!("{}: {msg}", model.describe()))
            }
            other => Error::PredictorFailure(format!("{}: {other}", model.describe())),
        })?;
    if out.len() != batch.len() {
        return Err(Error::PredictorFailure(format!(
            "{} returned {} predictions for {} observations",
            model.describe(),
            out.len(),
            batch.len()
        )));
    }
    if let Some(bad) = out.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::PredictorFailure(format!(
            "{} returned {bad}, outside [0, 1]",
            model.describe()
        )));
    }
    Ok(out)
}

/// Always predicts the same probability.
#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub f64);

impl Predictor for ConstantPredictor {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        Ok(vec![self.0; batch.len()])
    }

    fn describe(&self) -> String {
        format!("constant:{}", self.0)
    }
}

/// Adapts a plain function of one observation.
pub struct FnPredictor<F> {
    name: String,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&Observation) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&Observation) -> f64 + Send + Sync,
{
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        Ok(batch.iter().map(&self.f).collect())
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// Default steepness of the analytic predictors, in inverse boundary-distance units.
pub const DEFAULT_SHARPNESS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Cross(CrossGeometry),
    Ellipsoid(EllipsoidGeometry),
}

/// `1 / (1 + exp(-s * d(x)))` where `d` is the signed distance to a region
/// boundary, positive on the positive-class side.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticBoundaryPredictor {
    pub region: Region,
    pub sharpness: f64,
    /// Whether the positive class lies inside the region.
    pub positive_inside: bool,
}

impl AnalyticBoundaryPredictor {
    /// Cross region, positive class inside (the 2D synthetic scenario).
    pub fn cross(geometry: CrossGeometry, sharpness: f64) -> Self {
        Self {
            region: Region::Cross(geometry),
            sharpness,
            positive_inside: true,
        }
    }

    /// Ellipsoid region, positive class outside (the 3D synthetic scenario).
    pub fn ellipsoid(geometry: EllipsoidGeometry, sharpness: f64) -> Self {
        Self {
            region: Region::Ellipsoid(geometry),
            sharpness,
            positive_inside: false,
        }
    }

    pub fn dims(&self) -> usize {
        match self.region {
            Region::Cross(_) => 2,
            Region::Ellipsoid(_) => 3,
        }
    }

    /// Signed distance to the boundary, positive on the positive-class side.
    pub fn signed_distance(&self, point: &[f64]) -> f64 {
        let inside = match &self.region {
            Region::Cross(g) => g.signed_distance([point[0], point[1]]),
            Region::Ellipsoid(g) => -g.signed_distance([point[0], point[1], point[2]]),
        };
        if self.positive_inside {
            inside
        } else {
            -inside
        }
    }

    pub fn probability(&self, point: &[f64]) -> f64 {
        sigmoid(self.sharpness * self.signed_distance(point))
    }
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl Predictor for AnalyticBoundaryPredictor {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        let dims = self.dims();
        batch
            .iter()
            .map(|obs| {
                if obs.len() < dims {
                    return Err(Error::PredictorFailure(format!(
                        "analytic predictor needs {dims} numeric features, got {}",
                        obs.len()
                    )));
                }
                let mut point = [0.0; 3];
                for (j, slot) in point.iter_mut().enumerate().take(dims) {
                    *slot = obs.real(j).ok_or_else(|| {
                        Error::PredictorFailure(format!("feature #{j} is not numeric"))
                    })?;
                }
                Ok(self.probability(&point[..dims]))
            })
            .collect()
    }

    fn describe(&self) -> String {
        let shape = match self.region {
            Region::Cross(_) => "cross",
            Region::Ellipsoid(_) => "ellipsoid",
        };
        format!("{shape}:{}", self.sharpness)
    }
}

/// Fraction of positive labels among the k nearest training rows.
#[derive(Debug, Clone)]
pub struct KnnProbabilityPredictor {
    schema: Schema,
    scaling: Scaling,
    encoded: Vec<Vec<f64>>,
    labels: Vec<u8>,
    k: usize,
}

/// Stores the encoded training rows; distance ties go to the lowest row index.
pub fn fit_knn_predictor(data: &Dataset, k: usize) -> Result<KnnProbabilityPredictor> {
    let labels = data.labels().ok_or(Error::MissingLabels)?.to_vec();
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if k > data.len() {
        return Err(Error::KTooLarge {
            k,
            rows: data.len(),
        });
    }
    let scaling = Scaling::fit(data);
    let encoded = data
        .rows()
        .iter()
        .map(|row| {
            let mut v = Vec::new();
            encode_into(row, data.schema(), None, &scaling, &mut v)?;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KnnProbabilityPredictor {
        schema: data.schema().clone(),
        scaling,
        encoded,
        labels,
        k,
    })
}

impl KnnProbabilityPredictor {
    pub fn k(&self) -> usize {
        self.k
    }

    fn predict_one(&self, obs: &Observation, query: &mut Vec<f64>) -> Result<f64> {
        query.clear();
        encode_into(obs, &self.schema, None, &self.scaling, query)?;
        let mut dist: Vec<(f64, usize)> = self
            .encoded
            .iter()
            .enumerate()
            .map(|(i, row)| (squared_distance(row, query), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
        }
        let positives = dist[..self.k]
            .iter()
            .filter(|(_, i)| self.labels[*i] == 1)
            .count();
        Ok(positives as f64 / self.k as f64)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Predictor for KnnProbabilityPredictor {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        let mut query = Vec::new();
        batch
            .iter()
            .map(|obs| self.predict_one(obs, &mut query))
            .collect()
    }

    fn describe(&self) -> String {
        format!("knn:{}", self.k)
    }
}

/// Wraps an external model as a child process.
///
/// For every batch the command is spawned once, the batch is written to its
/// standard input as CSV (header row of feature names, one row per
/// observation), and one probability per line is read back from its
/// standard output.
#[derive(Debug, Clone)]
pub struct ProcessPredictor {
    program: String,
    args: Vec<String>,
    schema: Schema,
}

impl ProcessPredictor {
    pub fn new(program: impl Into<String>, args: Vec<String>, schema: Schema) -> Self {
        Self {
            program: program.into(),
            args,
            schema,
        }
    }

    fn write_batch(&self, batch: &[Observation]) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.schema.names())?;
        for obs in batch {
            w.write_record(obs.values().iter().map(format_cell))?;
        }
        w.into_inner()
            .map_err(|e| Error::PredictorFailure(e.to_string()))
    }
}

fn format_cell(v: &FeatureValue) -> String {
    match v {
        FeatureValue::Real(x) => format!("{x:?}"),
        other => other.to_string(),
    }
}

impl Predictor for ProcessPredictor {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        let payload = self.write_batch(batch)?;
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::PredictorFailure(format!("cannot spawn `{}`: {e}", self.program)))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(&payload));
        let stdout = child.stdout.take().expect("piped stdout");
        let mut out = Vec::with_capacity(batch.len());
        for (n, line) in BufReader::new(stdout).lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let p = line.parse::<f64>().map_err(|_| {
                Error::PredictorFailure(format!("line {}: `{line}` is not a probability", n + 1))
            })?;
            out.push(p);
        }
        let status = child.wait()?;
        // A child that exits without reading everything closes the pipe early.
        let _ = writer.join();
        if !status.success() {
            return Err(Error::PredictorFailure(format!(
                "`{}` exited with {status}",
                self.program
            )));
        }
        Ok(out)
    }

    fn concurrent_safe(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Counts how many observations reach the wrapped model.
pub struct CallCounter<P> {
    inner: P,
    observations: AtomicUsize,
    calls: AtomicUsize,
}

impl<P: Predictor> CallCounter<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            observations: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn observations(&self) -> usize {
        self.observations.load(Ordering::Relaxed)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.observations.store(0, Ordering::Relaxed);
        self.calls.store(0, Ordering::Relaxed);
    }
}

impl<P: Predictor> Predictor for CallCounter<P> {
    fn predict_proba(&self, batch: &[Observation]) -> Result<Vec<f64>> {
        self.observations.fetch_add(batch.len(), Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.predict_proba(batch)
    }

    fn concurrent_safe(&self) -> bool {
        self.inner.concurrent_safe()
    }

    fn describe(&self) -> String {
        self.inner.describe()
    }
}
