//! Synthetic benchmark datasets and the housing transformation pipeline.
//!
//! * a 2D cross: positives uniformly inside an axis-aligned cross, negatives
//!   uniformly in the rest of a sampling box;
//! * a 3D ellipsoid with radii (3, 1, 1): negatives inside, positives outside;
//! * the census housing table turned into a mixed-type classification problem
//!   (outlier filter, median splits, income quintiles, geographic quadrants).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureKind, FeatureSpec, FeatureValue, Observation, Schema};

/// Axis-aligned cross: union of `[-L, L] x [-W, W]` and `[-W, W] x [-L, L]`
/// around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossGeometry {
    pub arm_half_length: f64,
    pub arm_half_width: f64,
    pub center: [f64; 2],
    /// Sampling box, `[[x_min, x_max], [y_min, y_max]]`.
    pub bounds: [[f64; 2]; 2],
}

impl Default for CrossGeometry {
    fn default() -> Self {
        Self {
            arm_half_length: 1.4,
            arm_half_width: 0.35,
            center: [0.0, 0.0],
            bounds: [[-2.0, 2.0], [-2.0, 2.0]],
        }
    }
}

impl CrossGeometry {
    pub fn validate(&self) -> Result<()> {
        let (l, w) = (self.arm_half_length, self.arm_half_width);
        if !(w > 0.0 && w < l) {
            return Err(Error::ImpossibleGeometry(format!(
                "cross needs 0 < W < L (W = {w}, L = {l})"
            )));
        }
        for axis in 0..2 {
            let [lo, hi] = self.bounds[axis];
            if self.center[axis] - l < lo || self.center[axis] + l > hi {
                return Err(Error::ImpossibleGeometry(format!(
                    "cross does not fit in the sampling box on axis {axis}"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (x, y) = self.local(p);
        let (l, w) = (self.arm_half_length, self.arm_half_width);
        (x <= l && y <= w) || (x <= w && y <= l)
    }

    /// Exact Euclidean signed distance to the cross boundary, positive inside.
    pub fn signed_distance(&self, p: [f64; 2]) -> f64 {
        let (x, y) = self.local(p);
        let (l, w) = (self.arm_half_length, self.arm_half_width);
        if self.contains(p) {
            // The complement is {|x| > L} ∪ {|y| > L} ∪ {|x| > W and |y| > W}.
            let corner = (w - x).max(0.0).hypot((w - y).max(0.0));
            (l - x).min(l - y).min(corner)
        } else {
            let rect = |hx: f64, hy: f64| (x - hx).max(0.0).hypot((y - hy).max(0.0));
            -rect(l, w).min(rect(w, l))
        }
    }

    /// Absolute coordinates relative to the centre (the cross is symmetric).
    fn local(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.center[0]).abs(), (p[1] - self.center[1]).abs())
    }
}

/// Ellipsoid centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidGeometry {
    pub radii: [f64; 3],
    pub bounds: [[f64; 2]; 3],
}

impl Default for EllipsoidGeometry {
    fn default() -> Self {
        Self {
            radii: [3.0, 1.0, 1.0],
            bounds: [[-4.0, 4.0], [-2.0, 2.0], [-2.0, 2.0]],
        }
    }
}

impl EllipsoidGeometry {
    pub fn validate(&self) -> Result<()> {
        for axis in 0..3 {
            let r = self.radii[axis];
            let [lo, hi] = self.bounds[axis];
            if r <= 0.0 || -r < lo || r > hi {
                return Err(Error::ImpossibleGeometry(format!(
                    "ellipsoid radius {r} does not fit in the sampling box on axis {axis}"
                )));
            }
        }
        Ok(())
    }

    /// `(x/a)² + (y/b)² + (z/c)²`; at most 1 inside.
    pub fn level(&self, p: [f64; 3]) -> f64 {
        p.iter()
            .zip(&self.radii)
            .map(|(v, r)| (v / r) * (v / r))
            .sum()
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.level(p) <= 1.0
    }

    /// First-order signed distance `(r - 1) / |∇r|` with `r = sqrt(level)`,
    /// positive outside. Exact zero set, monotone along rays from the centre.
    pub fn signed_distance(&self, p: [f64; 3]) -> f64 {
        let r = self.level(p).sqrt();
        if r == 0.0 {
            return -self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        }
        let grad = p
            .iter()
            .zip(&self.radii)
            .map(|(v, a)| {
                let g = v / (a * a);
                g * g
            })
            .sum::<f64>()
            .sqrt()
            / r;
        (r - 1.0) / grad
    }
}

fn synthetic_schema(dims: usize) -> Schema {
    Schema::new(
        (1..=dims)
            .map(|i| FeatureSpec::continuous(format!("F{i}")))
            .collect(),
    )
    .expect("distinct names")
}

/// Rejection-samples `n_positive` points satisfying `positive` and the rest
/// violating it, uniformly within `bounds`, then shuffles the rows.
fn sample_labelled<const D: usize>(
    n_total: usize,
    n_positive: usize,
    bounds: &[[f64; 2]; D],
    seed: u64,
    positive: impl Fn([f64; D]) -> bool,
) -> Result<Dataset> {
    if n_positive > n_total {
        return Err(Error::InvalidConfig(format!(
            "{n_positive} positives requested out of {n_total} rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_draws = 1000 * n_total.max(1);
    let draw = |want: bool, rng: &mut ChaCha8Rng| -> Result<[f64; D]> {
        for _ in 0..max_draws {
            let mut p = [0.0; D];
            for (v, [lo, hi]) in p.iter_mut().zip(bounds) {
                *v = rng.gen_range(*lo..*hi);
            }
            if positive(p) == want {
                return Ok(p);
            }
        }
        Err(Error::ImpossibleGeometry(
            "rejection sampling did not find a point of the requested class".into(),
        ))
    };
    let mut points = Vec::with_capacity(n_total);
    for i in 0..n_total {
        let label = u8::from(i < n_positive);
        points.push((draw(label == 1, &mut rng)?, label));
    }
    points.shuffle(&mut rng);
    let (rows, labels) = points
        .into_iter()
        .map(|(p, l)| (Observation::from_reals(&p), l))
        .unzip();
    Dataset::new(synthetic_schema(D), rows, Some(labels))
}

/// 2D cross dataset: positives inside the cross, negatives outside.
pub fn generate_cross_2d(
    n_total: usize,
    n_positive: usize,
    geometry: &CrossGeometry,
    seed: u64,
) -> Result<Dataset> {
    geometry.validate()?;
    sample_labelled(n_total, n_positive, &geometry.bounds, seed, |p| {
        geometry.contains(p)
    })
}

/// 3D ellipsoid dataset: negatives inside the ellipsoid, positives outside.
pub fn generate_ellipsoid_3d(
    n_total: usize,
    n_positive: usize,
    geometry: &EllipsoidGeometry,
    seed: u64,
) -> Result<Dataset> {
    geometry.validate()?;
    sample_labelled(n_total, n_positive, &geometry.bounds, seed, |p| {
        !geometry.contains(p)
    })
}

/// Percentile of already-sorted data, linear interpolation between order
/// statistics (rank `p/100 * (n - 1)`).
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn column(data: &Dataset, idx: usize) -> Vec<f64> {
    data.rows().iter().filter_map(|r| r.real(idx)).collect()
}

fn sorted_column(data: &Dataset, idx: usize) -> Vec<f64> {
    let mut v = column(data, idx);
    v.sort_by(f64::total_cmp);
    v
}

/// Removes every row holding a value strictly below the `low_pct` or strictly
/// above the `high_pct` percentile of its column, for the listed columns.
/// Percentiles are computed once, on the input.
pub fn filter_outliers_on(
    data: &Dataset,
    columns: &[usize],
    low_pct: f64,
    high_pct: f64,
) -> Dataset {
    if data.is_empty() {
        return data.clone();
    }
    let thresholds: Vec<(usize, f64, f64)> = columns
        .iter()
        .map(|&j| {
            let s = sorted_column(data, j);
            (j, percentile(&s, low_pct), percentile(&s, high_pct))
        })
        .collect();
    data.filter_rows(|_, row| {
        thresholds.iter().all(|&(j, lo, hi)| {
            let v = row.real(j).expect("numeric column");
            v >= lo && v <= hi
        })
    })
}

/// [`filter_outliers_on`] over every continuous, integer and ordinal column.
pub fn filter_outliers(data: &Dataset, low_pct: f64, high_pct: f64) -> Dataset {
    let columns: Vec<usize> = data
        .schema()
        .features()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind.is_ordered())
        .map(|(j, _)| j)
        .collect();
    filter_outliers_on(data, &columns, low_pct, high_pct)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HousingTransformConfig {
    pub low_pct: f64,
    pub high_pct: f64,
    pub income_buckets: usize,
}

impl Default for HousingTransformConfig {
    fn default() -> Self {
        Self {
            low_pct: 5.0,
            high_pct: 95.0,
            income_buckets: 5,
        }
    }
}

/// Raw input columns, matched case-insensitively.
pub const HOUSING_FEATURES: [&str; 8] = [
    "medinc",
    "houseage",
    "averooms",
    "avebedrms",
    "population",
    "aveoccup",
    "latitude",
    "longitude",
];

/// Accepted names for the target column.
pub const HOUSING_TARGETS: [&str; 3] = ["medhouseval", "target", "median_house_value"];

/// Final feature names, in output order.
pub const HOUSING_OUTPUT: [&str; 7] = [
    "houseage",
    "averooms",
    "avebedrms",
    "aveoccup",
    "population_bin",
    "medinc_ord",
    "cardinal_point",
];

pub fn housing_output_schema(buckets: usize) -> Schema {
    Schema::new(vec![
        FeatureSpec::integer("houseage"),
        FeatureSpec::continuous("averooms"),
        FeatureSpec::continuous("avebedrms"),
        FeatureSpec::continuous("aveoccup"),
        FeatureSpec::binary("population_bin"),
        FeatureSpec::ordinal("medinc_ord", 0, buckets as i64 - 1),
        FeatureSpec::categorical("cardinal_point", ["NE", "NW", "SE", "SW"]),
    ])
    .expect("static schema")
}

/// Median-split indicator: 1 when `v >= median`.
fn median_split(sorted: &[f64], v: f64) -> i64 {
    i64::from(v >= percentile(sorted, 50.0))
}

/// Turns the raw eight-feature housing table (plus target column) into the
/// seven-feature mixed-type classification dataset.
pub fn transform_housing(raw: &Dataset) -> Result<Dataset> {
    transform_housing_with(raw, &HousingTransformConfig::default())
}

pub fn transform_housing_with(raw: &Dataset, config: &HousingTransformConfig) -> Result<Dataset> {
    if config.income_buckets < 2 {
        return Err(Error::InvalidConfig("need at least two income buckets".into()));
    }
    let find = |name: &str| -> Option<usize> {
        raw.schema()
            .features()
            .iter()
            .position(|f| f.name.eq_ignore_ascii_case(name))
    };
    let mut cols = [0usize; 8];
    for (slot, name) in cols.iter_mut().zip(HOUSING_FEATURES) {
        *slot = find(name)
            .ok_or_else(|| Error::SchemaMismatch(format!("missing column `{name}`")))?;
    }
    let target = HOUSING_TARGETS
        .iter()
        .find_map(|n| find(n))
        .ok_or_else(|| Error::SchemaMismatch("missing target column".into()))?;
    for &j in cols.iter().chain(std::iter::once(&target)) {
        let f = raw.schema().feature(j);
        if !matches!(f.kind, FeatureKind::Continuous | FeatureKind::Integer) {
            return Err(Error::SchemaMismatch(format!(
                "column `{}` must be numeric",
                f.name
            )));
        }
    }
    let [medinc, houseage, averooms, avebedrms, population, aveoccup, latitude, longitude] = cols;

    let data = filter_outliers_on(raw, &cols, config.low_pct, config.high_pct);
    if data.is_empty() {
        return Dataset::new(housing_output_schema(config.income_buckets), Vec::new(), Some(Vec::new()));
    }
    let n = data.len();
    let sorted_target = sorted_column(&data, target);
    let sorted_pop = sorted_column(&data, population);
    let sorted_lat = sorted_column(&data, latitude);
    let sorted_lon = sorted_column(&data, longitude);

    // equal-frequency income buckets by rank (ties broken by row order)
    let income = column(&data, medinc);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| income[a].total_cmp(&income[b]).then(a.cmp(&b)));
    let mut bucket = vec![0i64; n];
    for (rank, &i) in order.iter().enumerate() {
        bucket[i] = (rank * config.income_buckets / n) as i64;
    }

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, row) in data.rows().iter().enumerate() {
        let real = |j: usize| row.real(j).expect("numeric column");
        let age = real(houseage);
        if age.fract() != 0.0 {
            return Err(Error::SchemaMismatch(format!(
                "houseage {age} is not an integer"
            )));
        }
        let north = median_split(&sorted_lat, real(latitude)) == 1;
        let east = median_split(&sorted_lon, real(longitude)) == 1;
        let quadrant = match (north, east) {
            (true, true) => "NE",
            (true, false) => "NW",
            (false, true) => "SE",
            (false, false) => "SW",
        };
        rows.push(Observation::new(vec![
            FeatureValue::Int(age as i64),
            FeatureValue::Real(real(averooms)),
            FeatureValue::Real(real(avebedrms)),
            FeatureValue::Real(real(aveoccup)),
            FeatureValue::Int(median_split(&sorted_pop, real(population))),
            FeatureValue::Int(bucket[i]),
            FeatureValue::Label(quadrant.to_string()),
        ]));
        labels.push(median_split(&sorted_target, real(target)) as u8);
    }
    Dataset::new(housing_output_schema(config.income_buckets), rows, Some(labels))
}
