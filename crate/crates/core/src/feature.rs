//! Heterogeneous tabular data model: feature kinds, values, observations and datasets.
//!
//! An [`Observation`] stores one value per feature in schema order; the
//! feature names live in the governing [`Schema`]. Every other module works on
//! these types.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Integer,
    Binary,
    Ordinal,
    Categorical,
}

impl FeatureKind {
    /// Kinds explored along a signed axis (continuous, integer, ordinal).
    /// Binary and categorical features are explored value by value.
    pub fn is_ordered(self) -> bool {
        !matches!(self, FeatureKind::Categorical | FeatureKind::Binary)
    }

    /// Kinds represented as integers.
    pub fn is_integral(self) -> bool {
        matches!(
            self,
            FeatureKind::Integer | FeatureKind::Binary | FeatureKind::Ordinal
        )
    }

    pub fn is_numeric(self) -> bool {
        self != FeatureKind::Categorical
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Integer => "integer",
            FeatureKind::Binary => "binary",
            FeatureKind::Ordinal => "ordinal",
            FeatureKind::Categorical => "categorical",
        }
    }
}

/// A single feature value. The tag must agree with the feature's kind:
/// `Real` for continuous, `Int` for integer/binary/ordinal, `Label` for categorical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Int(i64),
    Real(f64),
    Label(String),
}

impl FeatureValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            FeatureValue::Int(v) => Some(v as f64),
            FeatureValue::Real(v) => Some(v),
            FeatureValue::Label(_) => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            FeatureValue::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            FeatureValue::Label(s) => Some(s),
            _ => None,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            FeatureValue::Int(_) => "integer",
            FeatureValue::Real(_) => "real",
            FeatureValue::Label(_) => "label",
        }
    }
}

impl std::fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureValue::Int(v) => write!(f, "{v}"),
            FeatureValue::Real(v) => write!(f, "{v}"),
            FeatureValue::Label(s) => f.write_str(s),
        }
    }
}

/// Declared metadata for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Inclusive level range, ordinal features only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<(i64, i64)>,
    /// Label set, categorical features only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self::plain(name, FeatureKind::Continuous)
    }

    pub fn integer(name: impl Into<String>) -> Self {
        Self::plain(name, FeatureKind::Integer)
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::plain(name, FeatureKind::Binary)
    }

    pub fn ordinal(name: impl Into<String>, low: i64, high: i64) -> Self {
        Self {
            levels: Some((low, high)),
            ..Self::plain(name, FeatureKind::Ordinal)
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            categories: categories.into_iter().map(Into::into).collect(),
            ..Self::plain(name, FeatureKind::Categorical)
        }
    }

    fn plain(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            levels: None,
            categories: Vec::new(),
        }
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    /// Checks the declaration itself (not a value).
    pub fn check(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Categorical => {
                if self.categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical feature `{}` declares no categories",
                        self.name
                    )));
                }
                for (i, c) in self.categories.iter().enumerate() {
                    if self.categories[..i].contains(c) {
                        return Err(Error::Schema(format!(
                            "categorical feature `{}` repeats category `{c}`",
                            self.name
                        )));
                    }
                }
            }
            FeatureKind::Ordinal => match self.levels {
                Some((lo, hi)) if lo <= hi => {}
                _ => {
                    return Err(Error::Schema(format!(
                        "ordinal feature `{}` needs a level range low <= high",
                        self.name
                    )))
                }
            },
            _ => {}
        }
        Ok(())
    }

    /// Checks that `value` is admissible for this feature.
    pub fn check_value(&self, value: &FeatureValue) -> Result<()> {
        let mismatch = |expected| Error::KindMismatch {
            feature: self.name.clone(),
            expected,
            found: format!("{} `{value}`", value.tag()),
        };
        match (self.kind, value) {
            (FeatureKind::Continuous, FeatureValue::Real(v)) if v.is_finite() => Ok(()),
            (FeatureKind::Continuous, _) => Err(mismatch("finite real")),
            (FeatureKind::Integer, FeatureValue::Int(_)) => Ok(()),
            (FeatureKind::Integer, _) => Err(mismatch("integer")),
            (FeatureKind::Binary, FeatureValue::Int(0 | 1)) => Ok(()),
            (FeatureKind::Binary, _) => Err(mismatch("binary (0 or 1)")),
            (FeatureKind::Ordinal, FeatureValue::Int(v)) => match self.levels {
                Some((lo, hi)) if (lo..=hi).contains(v) => Ok(()),
                _ => Err(mismatch("ordinal level")),
            },
            (FeatureKind::Ordinal, _) => Err(mismatch("ordinal level")),
            (FeatureKind::Categorical, FeatureValue::Label(l)) => {
                if self.category_index(l).is_some() {
                    Ok(())
                } else {
                    Err(Error::UnknownCategory {
                        feature: self.name.clone(),
                        label: l.clone(),
                    })
                }
            }
            (FeatureKind::Categorical, _) => Err(mismatch("category label")),
        }
    }

    /// Parses a textual field (CSV cell, command-line pair) into a value of this kind.
    pub fn parse_value(&self, raw: &str) -> Result<FeatureValue> {
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(Error::MissingFeature(self.name.clone()));
        }
        let value = match self.kind {
            FeatureKind::Continuous => FeatureValue::Real(raw.parse::<f64>().map_err(|_| {
                Error::KindMismatch {
                    feature: self.name.clone(),
                    expected: "finite real",
                    found: format!("`{raw}`"),
                }
            })?),
            FeatureKind::Integer | FeatureKind::Binary | FeatureKind::Ordinal => {
                FeatureValue::Int(parse_integral(raw).ok_or_else(|| Error::KindMismatch {
                    feature: self.name.clone(),
                    expected: "integer",
                    found: format!("`{raw}`"),
                })?)
            }
            FeatureKind::Categorical => FeatureValue::Label(raw.to_string()),
        };
        self.check_value(&value)?;
        Ok(value)
    }
}

/// Accepts "3" as well as "3.0" (common in exported CSVs).
fn parse_integral(raw: &str) -> Option<i64> {
    if let Ok(v) = raw.parse::<i64>() {
        return Some(v);
    }
    let f = raw.parse::<f64>().ok()?;
    (f.is_finite() && f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

/// Ordered list of feature declarations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema {
    features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        for (i, f) in features.iter().enumerate() {
            f.check()?;
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, idx: usize) -> &FeatureSpec {
        &self.features[idx]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.position(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }
}

/// One feature vector, values in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation {
    values: Vec<FeatureValue>,
}

impl Observation {
    pub fn new(values: Vec<FeatureValue>) -> Self {
        Self { values }
    }

    /// Convenience for all-continuous schemas.
    pub fn from_reals(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&v| FeatureValue::Real(v)).collect())
    }

    /// Builds an observation from named values; every schema feature must be
    /// given exactly once.
    pub fn from_named<K, I>(schema: &Schema, pairs: I) -> Result<Self>
    where
        K: AsRef<str>,
        I: IntoIterator<Item = (K, FeatureValue)>,
    {
        let mut slots: Vec<Option<FeatureValue>> = vec![None; schema.len()];
        for (name, value) in pairs {
            let idx = schema.require(name.as_ref())?;
            slots[idx] = Some(value);
        }
        let values = slots
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::MissingFeature(schema.feature(i).name.clone())))
            .collect::<Result<Vec<_>>>()?;
        validate_observation(Self::new(values), schema)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[FeatureValue] {
        &self.values
    }

    pub fn get(&self, idx: usize) -> &FeatureValue {
        &self.values[idx]
    }

    pub fn set(&mut self, idx: usize, value: FeatureValue) {
        self.values[idx] = value;
    }

    pub fn with(&self, idx: usize, value: FeatureValue) -> Self {
        let mut out = self.clone();
        out.set(idx, value);
        out
    }

    /// Numeric view of a feature; `None` for labels.
    pub fn real(&self, idx: usize) -> Option<f64> {
        self.values[idx].as_f64()
    }

    pub fn to_named(&self, schema: &Schema) -> IndexMap<String, FeatureValue> {
        schema
            .names()
            .map(str::to_string)
            .zip(self.values.iter().cloned())
            .collect()
    }
}

/// Checks arity and that every value matches its feature's kind and label set.
/// Numeric values are not range-checked.
pub fn validate_observation(obs: Observation, schema: &Schema) -> Result<Observation> {
    if obs.len() < schema.len() {
        return Err(Error::MissingFeature(
            schema.feature(obs.len()).name.clone(),
        ));
    }
    if obs.len() > schema.len() {
        return Err(Error::UnknownFeature(format!("#{}", schema.len())));
    }
    for (spec, value) in schema.features().iter().zip(obs.values()) {
        spec.check_value(value)?;
    }
    Ok(obs)
}

/// Labelled (or unlabelled) tabular data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Observation>,
    labels: Option<Vec<u8>>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Observation>, labels: Option<Vec<u8>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|r| validate_observation(r, &schema))
            .collect::<Result<Vec<_>>>()?;
        if let Some(labels) = &labels {
            if labels.len() != rows.len() {
                return Err(Error::Schema(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.len()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::Schema(format!("class label {bad} is not 0 or 1")));
            }
        }
        Ok(Self {
            schema,
            rows,
            labels,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Observation] {
        &self.rows
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Observed (min, max) of a numeric feature; `None` for categorical or empty data.
    pub fn observed_range(&self, idx: usize) -> Option<(f64, f64)> {
        if !self.schema.feature(idx).kind.is_numeric() {
            return None;
        }
        self.rows
            .iter()
            .filter_map(|r| r.real(idx))
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }

    /// Keeps the rows for which `keep` returns true (labels follow).
    pub fn filter_rows(&self, mut keep: impl FnMut(usize, &Observation) -> bool) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = self.labels.as_ref().map(|_| Vec::new());
        for (i, row) in self.rows.iter().enumerate() {
            if keep(i, row) {
                rows.push(row.clone());
                if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                    out.push(src[i]);
                }
            }
        }
        Dataset {
            schema: self.schema.clone(),
            rows,
            labels,
        }
    }
}

/// Per-feature z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaling {
    /// Statistics of every numeric-like feature; categorical slots hold (0, 0).
    pub fn fit(data: &Dataset) -> Scaling {
        let n = data.schema().len();
        let mut mean = vec![0.0; n];
        let mut std = vec![0.0; n];
        if data.is_empty() {
            return Scaling { mean, std };
        }
        let count = data.len() as f64;
        for j in 0..n {
            if !data.schema().feature(j).kind.is_numeric() {
                continue;
            }
            let m = data.rows().iter().filter_map(|r| r.real(j)).sum::<f64>() / count;
            let var = data
                .rows()
                .iter()
                .filter_map(|r| r.real(j))
                .map(|v| (v - m) * (v - m))
                .sum::<f64>()
                / count;
            mean[j] = m;
            std[j] = var.sqrt();
        }
        Scaling { mean, std }
    }
}

/// Number of coordinates produced by [`encode_for_distance`].
pub fn encoded_len(schema: &Schema, exclude: Option<usize>) -> usize {
    schema
        .features()
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != exclude)
        .map(|(_, f)| match f.kind {
            FeatureKind::Categorical => f.categories.len(),
            _ => 1,
        })
        .sum()
}

/// Mixed-type embedding used for nearest-neighbour distances: numeric-like
/// features are z-scored (zero deviation maps to 0), categorical features are
/// one-hot encoded, and the excluded feature contributes nothing.
pub fn encode_for_distance(
    obs: &Observation,
    schema: &Schema,
    exclude: Option<&str>,
    scaling: &Scaling,
) -> Result<Vec<f64>> {
    let exclude = exclude.map(|name| schema.require(name)).transpose()?;
    let mut out = Vec::with_capacity(encoded_len(schema, exclude));
    encode_into(obs, schema, exclude, scaling, &mut out)?;
    Ok(out)
}

pub(crate) fn encode_into(
    obs: &Observation,
    schema: &Schema,
    exclude: Option<usize>,
    scaling: &Scaling,
    out: &mut Vec<f64>,
) -> Result<()> {
    for (j, spec) in schema.features().iter().enumerate() {
        if Some(j) == exclude {
            continue;
        }
        let value = obs.get(j);
        spec.check_value(value)?;
        match spec.kind {
            FeatureKind::Categorical => {
                let hot = value
                    .as_label()
                    .and_then(|l| spec.category_index(l))
                    .expect("checked above");
                out.extend((0..spec.categories.len()).map(|c| if c == hot { 1.0 } else { 0.0 }));
            }
            _ => {
                let v = value.as_f64().expect("checked above");
                let sd = scaling.std[j];
                out.push(if sd > 0.0 {
                    (v - scaling.mean[j]) / sd
                } else {
                    0.0
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_reals() -> Schema {
        Schema::new(vec![FeatureSpec::continuous("F1"), FeatureSpec::continuous("F2")]).unwrap()
    }

    #[test]
    fn accepts_well_formed_observation() {
        let schema = two_reals();
        let obs = Observation::from_reals(&[0.81, -0.12]);
        assert_eq!(validate_observation(obs.clone(), &schema).unwrap(), obs);
    }

    #[test]
    fn rejects_missing_feature() {
        let schema = two_reals();
        let err = validate_observation(Observation::from_reals(&[0.81]), &schema).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(ref f) if f == "F2"));
        let err = Observation::from_named(&schema, [("F1", FeatureValue::Real(0.81))]).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(_)));
        let err = Observation::from_named(
            &schema,
            [("F1", FeatureValue::Real(0.81)), ("F9", FeatureValue::Real(0.0))],
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownFeature(ref f) if f == "F9"));
    }

    #[test]
    fn rejects_unknown_category() {
        let schema =
            Schema::new(vec![FeatureSpec::categorical("cardinal_point", ["NE", "NW", "SE", "SW"])])
                .unwrap();
        let obs = Observation::new(vec![FeatureValue::Label("XX".into())]);
        let err = validate_observation(obs, &schema).unwrap_err();
        assert!(matches!(err, Error::UnknownCategory { ref label, .. } if label == "XX"));
    }

    #[test]
    fn rejects_kind_mismatch() {
        let schema = Schema::new(vec![
            FeatureSpec::binary("b"),
            FeatureSpec::ordinal("o", 0, 4),
        ])
        .unwrap();
        for bad in [
            vec![FeatureValue::Int(2), FeatureValue::Int(0)],
            vec![FeatureValue::Int(1), FeatureValue::Int(5)],
            vec![FeatureValue::Real(1.0), FeatureValue::Int(0)],
        ] {
            let err = validate_observation(Observation::new(bad), &schema).unwrap_err();
            assert!(matches!(err, Error::KindMismatch { .. }), "{err}");
        }
    }

    #[test]
    fn numeric_values_are_not_range_checked() {
        let schema = two_reals();
        assert!(validate_observation(Observation::from_reals(&[1e9, -1e9]), &schema).is_ok());
    }

    #[test]
    fn schema_rejects_bad_declarations() {
        assert!(Schema::new(vec![FeatureSpec::categorical("c", Vec::<String>::new())]).is_err());
        assert!(Schema::new(vec![FeatureSpec::categorical("c", ["a", "a"])]).is_err());
        assert!(Schema::new(vec![FeatureSpec::ordinal("o", 3, 1)]).is_err());
        assert!(
            Schema::new(vec![FeatureSpec::continuous("x"), FeatureSpec::integer("x")]).is_err()
        );
    }

    #[test]
    fn zscore_single_feature() {
        let schema = Schema::new(vec![FeatureSpec::continuous("x")]).unwrap();
        let scaling = Scaling {
            mean: vec![2.0],
            std: vec![2.0],
        };
        let v = encode_for_distance(&Observation::from_reals(&[4.0]), &schema, None, &scaling)
            .unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn excluded_categorical_contributes_nothing() {
        let schema = Schema::new(vec![
            FeatureSpec::continuous("num"),
            FeatureSpec::categorical("cat", ["a", "b", "c"]),
        ])
        .unwrap();
        let scaling = Scaling {
            mean: vec![3.0, 0.0],
            std: vec![1.5, 0.0],
        };
        let obs = Observation::new(vec![FeatureValue::Real(3.0), FeatureValue::Label("b".into())]);
        let v = encode_for_distance(&obs, &schema, Some("cat"), &scaling).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn one_hot_layout_follows_schema_order() {
        let schema = Schema::new(vec![
            FeatureSpec::continuous("num"),
            FeatureSpec::categorical("catA", ["x", "y"]),
            FeatureSpec::categorical("catB", ["p", "q"]),
        ])
        .unwrap();
        let scaling = Scaling {
            mean: vec![1.0, 0.0, 0.0],
            std: vec![0.5, 0.0, 0.0],
        };
        let obs = Observation::new(vec![
            FeatureValue::Real(1.0),
            FeatureValue::Label("x".into()),
            FeatureValue::Label("q".into()),
        ]);
        let v = encode_for_distance(&obs, &schema, Some("catA"), &scaling).unwrap();
        assert_eq!(v, vec![0.0, 0.0, 1.0]);
        assert_eq!(encoded_len(&schema, None), 5);
        assert_eq!(encode_for_distance(&obs, &schema, None, &scaling).unwrap().len(), 5);
    }

    #[test]
    fn zero_variance_maps_to_zero() {
        let schema = Schema::new(vec![FeatureSpec::integer("k")]).unwrap();
        let data = Dataset::new(
            schema.clone(),
            vec![
                Observation::new(vec![FeatureValue::Int(7)]),
                Observation::new(vec![FeatureValue::Int(7)]),
            ],
            None,
        )
        .unwrap();
        let scaling = Scaling::fit(&data);
        let v = encode_for_distance(data.rows().first().unwrap(), &schema, None, &scaling).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn parse_value_per_kind() {
        assert_eq!(
            FeatureSpec::integer("h").parse_value("41.0").unwrap(),
            FeatureValue::Int(41)
        );
        assert!(FeatureSpec::integer("h").parse_value("41.5").is_err());
        assert!(matches!(
            FeatureSpec::continuous("x").parse_value(""),
            Err(Error::MissingFeature(_))
        ));
        assert!(FeatureSpec::binary("b").parse_value("2").is_err());
    }

    #[test]
    fn dataset_checks_labels() {
        let schema = two_reals();
        let rows = vec![Observation::from_reals(&[0.0, 0.0])];
        assert!(Dataset::new(schema.clone(), rows.clone(), Some(vec![0, 1])).is_err());
        assert!(Dataset::new(schema.clone(), rows.clone(), Some(vec![2])).is_err());
        assert!(Dataset::new(schema, rows, Some(vec![1])).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn value_strategy(spec: &FeatureSpec) -> BoxedStrategy<FeatureValue> {
            match spec.kind {
                FeatureKind::Continuous => (-1e6f64..1e6).prop_map(FeatureValue::Real).boxed(),
                FeatureKind::Integer => (-1000i64..1000).prop_map(FeatureValue::Int).boxed(),
                FeatureKind::Binary => (0i64..2).prop_map(FeatureValue::Int).boxed(),
                FeatureKind::Ordinal => {
                    let (lo, hi) = spec.levels.unwrap();
                    (lo..=hi).prop_map(FeatureValue::Int).boxed()
                }
                FeatureKind::Categorical => {
                    proptest::sample::select(spec.categories.clone())
                        .prop_map(FeatureValue::Label)
                        .boxed()
                }
            }
        }

        fn schema_and_obs() -> impl Strategy<Value = (Schema, Observation)> {
            proptest::collection::vec(0u8..5, 1..7)
                .prop_map(|kinds| {
                    let specs = kinds
                        .iter()
                        .enumerate()
                        .map(|(i, k)| match k {
                            0 => FeatureSpec::continuous(format!("f{i}")),
                            1 => FeatureSpec::integer(format!("f{i}")),
                            2 => FeatureSpec::binary(format!("f{i}")),
                            3 => FeatureSpec::ordinal(format!("f{i}"), -2, 3),
                            _ => FeatureSpec::categorical(format!("f{i}"), ["a", "b", "c"]),
                        })
                        .collect();
                    Schema::new(specs).unwrap()
                })
                .prop_flat_map(|schema| {
                    let values: Vec<_> = schema.features().iter().map(value_strategy).collect();
                    (Just(schema), values.prop_map(Observation::new))
                })
        }

        proptest! {
            #[test]
            fn validation_is_idempotent((schema, obs) in schema_and_obs()) {
                let once = validate_observation(obs.clone(), &schema).unwrap();
                let twice = validate_observation(once.clone(), &schema).unwrap();
                prop_assert_eq!(&once, &obs);
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn encoding_length_matches_layout((schema, obs) in schema_and_obs(), pick in 0usize..8) {
                let exclude = (pick < schema.len()).then_some(pick);
                let scaling = Scaling { mean: vec![0.0; schema.len()], std: vec![1.0; schema.len()] };
                let name = exclude.map(|j| schema.feature(j).name.clone());
                let v = encode_for_distance(&obs, &schema, name.as_deref(), &scaling).unwrap();
                prop_assert_eq!(v.len(), encoded_len(&schema, exclude));
            }

            #[test]
            fn integral_values_round_trip_through_json((schema, obs) in schema_and_obs()) {
                let text = serde_json::to_string(&obs).unwrap();
                let back: Observation = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(validate_observation(back.clone(), &schema).unwrap(), obs);
            }
        }
    }
}
