//! The explanation grid: per-feature value grids, stability ranges and
//! category orderings, fitted once on training data and persisted so that
//! explanations can be produced at inference time without the training set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{
    encode_into, Dataset, FeatureKind, FeatureSpec, FeatureValue, Observation, Scaling, Schema,
};
use crate::predictor::squared_distance;

pub const GRID_VERSION: &str = "muce-grid/1";

pub const DEFAULT_GRID_SIZE: usize = 50;
pub const DEFAULT_STABILITY_FRACTION: f64 = 0.05;
pub const DEFAULT_K_CATEGORIES: usize = 5;

/// How the category-ordering payload is stored in the grid artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OrderingMode {
    /// Every encoded training row is kept; exact k-NN ordering at inference time.
    #[default]
    Neighbors,
    /// Only one centroid per category is kept; no individual rows are persisted.
    Centroids,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n_grid: usize,
    pub stability_fraction: f64,
    pub k_categories: usize,
    pub ordering: OrderingMode,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_grid: DEFAULT_GRID_SIZE,
            stability_fraction: DEFAULT_STABILITY_FRACTION,
            k_categories: DEFAULT_K_CATEGORIES,
            ordering: OrderingMode::Neighbors,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 2 {
            return Err(Error::InvalidConfig("grid size must be at least 2".into()));
        }
        if !(self.stability_fraction > 0.0 && self.stability_fraction <= 0.5) {
            return Err(Error::InvalidConfig(format!(
                "stability fraction {} outside (0, 0.5]",
                self.stability_fraction
            )));
        }
        if self.k_categories == 0 {
            return Err(Error::InvalidConfig("k for category ordering must be positive".into()));
        }
        Ok(())
    }
}

/// Fitted grid of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<(i64, i64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Half-width of the stability range (ordered kinds only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Grid values; for categorical features the full label set.
    pub values: Vec<FeatureValue>,
}

impl FeatureGrid {
    fn spec(&self) -> FeatureSpec {
        FeatureSpec {
            name: self.name.clone(),
            kind: self.kind,
            levels: self.levels,
            categories: if self.kind == FeatureKind::Categorical {
                self.values
                    .iter()
                    .filter_map(|v| v.as_label().map(str::to_string))
                    .collect()
            } else {
                Vec::new()
            },
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.0)
    }
}

/// Reference points used to rank the labels of one categorical feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPayload {
    pub feature: String,
    /// Encoded points (every other feature, see [`crate::feature::encode_for_distance`]).
    pub points: Vec<Vec<f64>>,
    /// Label index of each point.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryModel {
    pub mode: OrderingMode,
    pub scaling: Scaling,
    pub features: Vec<CategoryPayload>,
}

/// Serialized form of [`ExplanationGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GridDocument {
    version: String,
    stability_fraction: f64,
    n_grid: usize,
    k_categories: usize,
    features: Vec<FeatureGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_model: Option<CategoryModel>,
}

/// The persisted explanation artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationGrid {
    doc: GridDocument,
    schema: Schema,
}

impl ExplanationGrid {
    fn from_document(doc: GridDocument) -> Result<Self> {
        if doc.version != GRID_VERSION {
            return Err(Error::GridVersion(doc.version));
        }
        let schema = Schema::new(doc.features.iter().map(FeatureGrid::spec).collect())?;
        Ok(Self { doc, schema })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn features(&self) -> &[FeatureGrid] {
        &self.doc.features
    }

    pub fn feature(&self, idx: usize) -> &FeatureGrid {
        &self.doc.features[idx]
    }

    pub fn stability_fraction(&self) -> f64 {
        self.doc.stability_fraction
    }

    pub fn n_grid(&self) -> usize {
        self.doc.n_grid
    }

    pub fn k_categories(&self) -> usize {
        self.doc.k_categories
    }

    pub fn category_model(&self) -> Option<&CategoryModel> {
        self.doc.category_model.as_ref()
    }

    /// Overrides the stability half-width of an ordered feature (for instance
    /// a known measurement error).
    pub fn set_delta(&mut self, feature: &str, delta: f64) -> Result<()> {
        let idx = self.schema.require(feature)?;
        let fg = &mut self.doc.features[idx];
        if !fg.kind.is_ordered() {
            return Err(Error::InvalidConfig(format!(
                "feature `{feature}` has no numeric stability range"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid delta {delta}")));
        }
        fg.delta = Some(delta);
        Ok(())
    }

    /// Re-derives every stability half-width from a new fraction of the
    /// observed ranges (this discards `set_delta` overrides).
    pub fn set_stability_fraction(&mut self, fraction: f64) -> Result<()> {
        GridConfig {
            stability_fraction: fraction,
            ..GridConfig::default()
        }
        .validate()?;
        self.doc.stability_fraction = fraction;
        for fg in &mut self.doc.features {
            if let (true, Some(lo), Some(hi)) = (fg.kind.is_ordered(), fg.min, fg.max) {
                fg.delta = Some(fraction * (hi - lo));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }
}

/// `n` evenly spaced values from `lo` to `hi`, both ends exact.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * (i as f64 / (n - 1) as f64)
                }
            })
            .collect(),
    }
}

/// Rounds each value to the nearest integer and removes duplicates (sorted).
pub(crate) fn round_dedup(values: impl IntoIterator<Item = f64>) -> Vec<i64> {
    let mut out: Vec<i64> = values.into_iter().map(|v| v.round() as i64).collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn fit_grid(
    data: &Dataset,
    n: usize,
    stability_fraction: f64,
    k_categories: usize,
) -> Result<ExplanationGrid> {
    fit_grid_with(
        data,
        &GridConfig {
            n_grid: n,
            stability_fraction,
            k_categories,
            ordering: OrderingMode::Neighbors,
        },
    )
}

/// Fits value grids from each feature's observed range (or label set),
/// stability half-widths `fraction * (max - min)`, and the category-ordering
/// payload for categorical features.
pub fn fit_grid_with(data: &Dataset, config: &GridConfig) -> Result<ExplanationGrid> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let schema = data.schema();
    let mut features = Vec::with_capacity(schema.len());
    for (j, spec) in schema.features().iter().enumerate() {
        let range = data.observed_range(j);
        let (values, delta) = match spec.kind {
            FeatureKind::Continuous => {
                let (lo, hi) = range.expect("numeric feature of non-empty data");
                let values = if lo == hi {
                    vec![lo]
                } else {
                    linspace(lo, hi, config.n_grid)
                };
                (
                    values.into_iter().map(FeatureValue::Real).collect(),
                    Some(config.stability_fraction * (hi - lo)),
                )
            }
            FeatureKind::Integer | FeatureKind::Ordinal => {
                let (lo, hi) = range.expect("numeric feature of non-empty data");
                (
                    round_dedup(linspace(lo, hi, config.n_grid))
                        .into_iter()
                        .map(FeatureValue::Int)
                        .collect(),
                    Some(config.stability_fraction * (hi - lo)),
                )
            }
            FeatureKind::Binary => (vec![FeatureValue::Int(0), FeatureValue::Int(1)], None),
            FeatureKind::Categorical => (
                spec.categories
                    .iter()
                    .cloned()
                    .map(FeatureValue::Label)
                    .collect(),
                None,
            ),
        };
        features.push(FeatureGrid {
            name: spec.name.clone(),
            kind: spec.kind,
            levels: spec.levels,
            min: range.map(|r| r.0),
            max: range.map(|r| r.1),
            delta,
            values,
        });
    }

    let categorical: Vec<usize> = (0..schema.len())
        .filter(|&j| schema.feature(j).kind == FeatureKind::Categorical)
        .collect();
    let category_model = if categorical.is_empty() {
        None
    } else {
        let scaling = Scaling::fit(data);
        let payloads = categorical
            .iter()
            .map(|&j| {
                let full = CategoryPayload::from_dataset(data, j, &scaling)?;
                Ok(match config.ordering {
                    OrderingMode::Neighbors => full,
                    OrderingMode::Centroids => {
                        full.into_centroids(schema.feature(j).categories.len())
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Some(CategoryModel {
            mode: config.ordering,
            scaling,
            features: payloads,
        })
    };

    ExplanationGrid::from_document(GridDocument {
        version: GRID_VERSION.to_string(),
        stability_fraction: config.stability_fraction,
        n_grid: config.n_grid,
        k_categories: config.k_categories,
        features,
        category_model,
    })
}

impl CategoryPayload {
    fn from_dataset(data: &Dataset, feature: usize, scaling: &Scaling) -> Result<Self> {
        let spec = data.schema().feature(feature);
        if spec.kind != FeatureKind::Categorical {
            return Err(Error::NotCategorical(spec.name.clone()));
        }
        let mut points = Vec::with_capacity(data.len());
        let mut labels = Vec::with_capacity(data.len());
        for row in data.rows() {
            let mut v = Vec::new();
            encode_into(row, data.schema(), Some(feature), scaling, &mut v)?;
            points.push(v);
            let label = row.get(feature).as_label().expect("validated row");
            labels.push(spec.category_index(label).expect("validated row"));
        }
        Ok(Self {
            feature: spec.name.clone(),
            points,
            labels,
        })
    }

    fn into_centroids(self, n_labels: usize) -> Self {
        let dim = self.points.first().map_or(0, Vec::len);
        let mut sums = vec![vec![0.0; dim]; n_labels];
        let mut counts = vec![0usize; n_labels];
        for (p, &l) in self.points.iter().zip(&self.labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (l, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            if count > 0 {
                points.push(sum.into_iter().map(|s| s / count as f64).collect());
                labels.push(l);
            }
        }
        Self {
            feature: self.feature,
            points,
            labels,
        }
    }
}

/// Category labels sorted by mean distance from the observation to each
/// label's nearest reference points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCategories {
    pub labels: Vec<String>,
    /// Mean distance per ranked label; `None` for labels without reference
    /// points (ranked last).
    pub mean_distance: Vec<Option<f64>>,
}

impl RankedCategories {
    /// Labels that had no reference point.
    pub fn empty_categories(&self) -> impl Iterator<Item = &str> {
        self.labels
            .iter()
            .zip(&self.mean_distance)
            .filter(|(_, d)| d.is_none())
            .map(|(l, _)| l.as_str())
    }
}

fn rank_labels(
    spec: &FeatureSpec,
    query: &[f64],
    payload: &CategoryPayload,
    k: usize,
) -> RankedCategories {
    let mut per_label: Vec<Vec<f64>> = vec![Vec::new(); spec.categories.len()];
    for (p, &l) in payload.points.iter().zip(&payload.labels) {
        per_label[l].push(squared_distance(p, query).sqrt());
    }
    let mut scored: Vec<(Option<f64>, &str)> = per_label
        .iter_mut()
        .zip(&spec.categories)
        .map(|(d, label)| {
            if d.is_empty() {
                return (None, label.as_str());
            }
            d.sort_by(f64::total_cmp);
            let take = k.min(d.len());
            (Some(d[..take].iter().sum::<f64>() / take as f64), label.as_str())
        })
        .collect();
    scored.sort_by(|a, b| match (a.0, b.0) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.1.cmp(b.1)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.1.cmp(b.1),
    });
    RankedCategories {
        labels: scored.iter().map(|(_, l)| l.to_string()).collect(),
        mean_distance: scored.iter().map(|(d, _)| *d).collect(),
    }
}

/// Ranks the labels of a categorical feature by the mean distance from `obs`
/// to the `min(k, count)` nearest training rows of each label, every other
/// feature participating in the distance. Ties are broken lexicographically.
pub fn order_categories(
    data: &Dataset,
    feature: &str,
    obs: &Observation,
    k: usize,
) -> Result<RankedCategories> {
    let j = data.schema().require(feature)?;
    let spec = data.schema().feature(j);
    if spec.kind != FeatureKind::Categorical {
        return Err(Error::NotCategorical(feature.to_string()));
    }
    let scaling = Scaling::fit(data);
    let payload = CategoryPayload::from_dataset(data, j, &scaling)?;
    let mut query = Vec::new();
    encode_into(obs, data.schema(), Some(j), &scaling, &mut query)?;
    Ok(rank_labels(spec, &query, &payload, k.max(1)))
}

/// Ranks categories with the payload stored in the grid.
pub fn order_categories_in_grid(
    grid: &ExplanationGrid,
    feature: usize,
    obs: &Observation,
) -> Result<RankedCategories> {
    let spec = grid.schema().feature(feature);
    if spec.kind != FeatureKind::Categorical {
        return Err(Error::NotCategorical(spec.name.clone()));
    }
    let model = grid.category_model();
    let payload = model.and_then(|m| m.features.iter().find(|p| p.feature == spec.name));
    match (model, payload) {
        (Some(model), Some(payload)) => {
            let mut query = Vec::new();
            encode_into(obs, grid.schema(), Some(feature), &model.scaling, &mut query)?;
            Ok(rank_labels(spec, &query, payload, grid.k_categories()))
        }
        // no payload: every label ties, so the order is lexicographic
        _ => {
            let mut labels = spec.categories.clone();
            labels.sort();
            Ok(RankedCategories {
                mean_distance: vec![None; labels.len()],
                labels,
            })
        }
    }
}

/// Hook for ad hoc (for example expert-supplied) category orderings.
pub trait CategoryOrdering: Send + Sync {
    /// Returns every label of `feature`, nearest first.
    fn order(&self, grid: &ExplanationGrid, feature: usize, obs: &Observation) -> Result<Vec<String>>;
}

/// The default ordering: k-nearest-neighbour distances from the grid payload.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeighborOrdering;

impl CategoryOrdering for NeighborOrdering {
    fn order(&self, grid: &ExplanationGrid, feature: usize, obs: &Observation) -> Result<Vec<String>> {
        Ok(order_categories_in_grid(grid, feature, obs)?.labels)
    }
}

/// Number of labels kept around the observation: `max(3, ceil(2 * fraction * cardinality))`,
/// capped at the cardinality.
pub fn category_count(cardinality: usize, stability_fraction: f64) -> usize {
    let scaled = 2.0 * stability_fraction * cardinality as f64;
    // guard against 2.0000000000000004-style overshoot
    let wanted = (scaled - 1e-9).ceil().max(0.0) as usize;
    wanted.max(3).min(cardinality)
}

/// Keeps the nearest labels of an ordering, always including the observation's own label.
pub fn select_categories(ordered: &[String], obs_label: &str, stability_fraction: f64) -> Vec<String> {
    let keep = category_count(ordered.len(), stability_fraction);
    let mut out: Vec<String> = ordered[..keep].to_vec();
    if !out.iter().any(|l| l == obs_label) {
        if let Some(last) = out.last_mut() {
            *last = obs_label.to_string();
        } else {
            out.push(obs_label.to_string());
        }
    }
    out
}

/// Region of one feature around an observation inside which perturbations are confined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StabilityInterval {
    Continuous { lower: f64, upper: f64 },
    /// Integer and ordinal features, rounded endpoints.
    Discrete { lower: i64, upper: i64 },
    /// Both values are always considered.
    Binary,
    /// Selected labels, nearest first.
    Categories { labels: Vec<String> },
}

impl StabilityInterval {
    pub fn contains(&self, value: &FeatureValue) -> bool {
        match (self, value) {
            (StabilityInterval::Continuous { lower, upper }, FeatureValue::Real(v)) => {
                *lower <= *v && *v <= *upper
            }
            (StabilityInterval::Discrete { lower, upper }, FeatureValue::Int(v)) => {
                *lower <= *v && *v <= *upper
            }
            (StabilityInterval::Binary, FeatureValue::Int(v)) => *v == 0 || *v == 1,
            (StabilityInterval::Categories { labels }, FeatureValue::Label(l)) => labels.contains(l),
            _ => false,
        }
    }

    /// Numeric endpoints, where defined.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            StabilityInterval::Continuous { lower, upper } => Some((lower, upper)),
            StabilityInterval::Discrete { lower, upper } => Some((lower as f64, upper as f64)),
            StabilityInterval::Binary => Some((0.0, 1.0)),
            StabilityInterval::Categories { .. } => None,
        }
    }

    /// Values this interval admits for a value-by-value (binary/categorical) exploration.
    pub fn positions(&self) -> Vec<FeatureValue> {
        match self {
            StabilityInterval::Binary => vec![FeatureValue::Int(0), FeatureValue::Int(1)],
            StabilityInterval::Categories { labels } => {
                labels.iter().cloned().map(FeatureValue::Label).collect()
            }
            _ => Vec::new(),
        }
    }
}

pub fn stability_interval(
    grid: &ExplanationGrid,
    obs: &Observation,
    feature: &str,
) -> Result<StabilityInterval> {
    let idx = grid.schema().require(feature)?;
    interval_at(grid, obs, idx, &NeighborOrdering)
}

/// Interval of feature `idx`: `x ± delta`, clamped to the observed range
/// (widened to include `x` itself when `x` lies outside it); rounded for
/// integer kinds; both values for binary; selected labels for categorical.
pub fn interval_at(
    grid: &ExplanationGrid,
    obs: &Observation,
    idx: usize,
    ordering: &dyn CategoryOrdering,
) -> Result<StabilityInterval> {
    let fg = grid.feature(idx);
    let value = obs.get(idx);
    grid.schema().feature(idx).check_value(value)?;
    Ok(match fg.kind {
        FeatureKind::Continuous | FeatureKind::Integer | FeatureKind::Ordinal => {
            let x = value.as_f64().expect("checked numeric");
            let lo = fg.min.unwrap_or(x).min(x);
            let hi = fg.max.unwrap_or(x).max(x);
            let d = fg.delta();
            let lower = (x - d).max(lo);
            let upper = (x + d).min(hi);
            if fg.kind == FeatureKind::Continuous {
                StabilityInterval::Continuous { lower, upper }
            } else {
                StabilityInterval::Discrete {
                    lower: lower.round() as i64,
                    upper: upper.round() as i64,
                }
            }
        }
        FeatureKind::Binary => StabilityInterval::Binary,
        FeatureKind::Categorical => {
            let label = value.as_label().expect("checked label");
            let ordered = ordering.order(grid, idx, obs)?;
            StabilityInterval::Categories {
                labels: select_categories(&ordered, label, grid.stability_fraction()),
            }
        }
    })
}

/// Intervals of every feature, schema order.
pub fn stability_intervals(grid: &ExplanationGrid, obs: &Observation) -> Result<Vec<StabilityInterval>> {
    stability_intervals_with(grid, obs, &NeighborOrdering)
}

pub fn stability_intervals_with(
    grid: &ExplanationGrid,
    obs: &Observation,
    ordering: &dyn CategoryOrdering,
) -> Result<Vec<StabilityInterval>> {
    (0..grid.schema().len())
        .map(|j| interval_at(grid, obs, j, ordering))
        .collect()
}
