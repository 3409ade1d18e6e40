//! The explanation report: a self-contained, versioned JSON document holding
//! everything needed to print the index tables and redraw every plot.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{FeatureKind, FeatureValue, Observation};
use crate::grid::{interval_at, ExplanationGrid, NeighborOrdering, StabilityInterval};
use crate::ice::IceCurve;
use crate::indices::{ConfidenceIndices, ObservationSummary};
use crate::muce::{Extremal, FeatureChange, FeatureVariation, Method, MuceConfig, MuceCurve};
use crate::predictor::{predict_proba, Predictor};

pub const REPORT_VERSION: &str = "muce-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub n: usize,
    pub nsteps: Vec<usize>,
    pub stability_fraction: f64,
    pub n_local: usize,
    pub k_categories: usize,
    pub seed: u64,
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub epsilon: IndexMap<String, f64>,
    /// Defaults taken from environment variables, echoed for reproducibility.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub environment: IndexMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub name: String,
    pub kind: FeatureKind,
    pub value: FeatureValue,
    pub indices: ConfidenceIndices,
    pub interval: StabilityInterval,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub ice: IceCurve,
    pub max_curve: MuceCurve,
    pub min_curve: MuceCurve,
    pub extremal_max: Extremal,
    pub extremal_min: Extremal,
    pub variation_max: FeatureVariation,
    pub variation_min: FeatureVariation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl FeatureReport {
    pub fn ordered(&self) -> bool {
        self.kind.is_ordered()
    }

    pub fn variation(&self, which: Method) -> &FeatureVariation {
        match which {
            Method::Max => &self.variation_max,
            Method::Min => &self.variation_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub version: String,
    pub model: String,
    pub feature_names: Vec<String>,
    pub observation: Observation,
    pub prediction: f64,
    pub config: ReportConfig,
    pub features: Vec<FeatureReport>,
}

impl ExplanationReport {
    /// Assembles a report from a computed summary.
    pub fn build<P: Predictor + ?Sized>(
        grid: &ExplanationGrid,
        obs: &Observation,
        model: &P,
        summary: &ObservationSummary,
        config: &MuceConfig,
        environment: IndexMap<String, String>,
    ) -> Result<Self> {
        let names: Vec<String> = grid.schema().names().map(str::to_string).collect();
        let prediction = predict_proba(model, std::slice::from_ref(obs))?[0];
        let features = summary
            .results
            .iter()
            .zip(&summary.indices)
            .enumerate()
            .map(|(j, (result, indices))| {
                let mut diagnostics = Vec::new();
                if !indices.negative_gaps.is_empty() {
                    diagnostics.push(format!(
                        "max curve below min curve at indices {:?}",
                        indices.negative_gaps
                    ));
                }
                let ice = &result.ice_restricted;
                let interval = interval_at(grid, obs, j, &NeighborOrdering)?;
                Ok(FeatureReport {
                    name: names[j].clone(),
                    kind: grid.feature(j).kind,
                    value: obs.get(j).clone(),
                    indices: indices.clone(),
                    interval,
                    epsilon: result.epsilon,
                    ice: ice.clone(),
                    max_curve: result.max_curve.clone(),
                    min_curve: result.min_curve.clone(),
                    extremal_max: result.extremal_max.clone(),
                    extremal_min: result.extremal_min.clone(),
                    variation_max: FeatureVariation::between(&names, obs, &result.extremal_max.observation),
                    variation_min: FeatureVariation::between(&names, obs, &result.extremal_min.observation),
                    diagnostics,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            version: REPORT_VERSION.to_string(),
            model: model.describe(),
            feature_names: names,
            observation: obs.clone(),
            prediction,
            config: ReportConfig {
                n: config.n,
                nsteps: config.nsteps.clone(),
                stability_fraction: grid.stability_fraction(),
                n_local: config.n_local,
                k_categories: grid.k_categories(),
                seed: config.seed,
                restarts: config.restarts,
                epsilon: config.epsilon.clone(),
                environment,
            },
            features,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.version != REPORT_VERSION {
            return Err(Error::data("report", format!("unsupported report version `{}`", report.version)));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Index table at full precision.
    pub fn indices_csv(&self) -> String {
        indices_csv(self.features.iter().map(|f| &f.indices))
    }

    /// Human-readable index table, two decimals.
    pub fn indices_table(&self) -> String {
        indices_table(self.features.iter().map(|f| &f.indices))
    }

    /// Feature-variation table for the extremal observations.
    pub fn variation_csv(&self) -> String {
        let mut out = String::from("feature_of_interest,extremum,feature,change,amount\n");
        for f in &self.features {
            for which in [Method::Max, Method::Min] {
                let tag = match which {
                    Method::Max => "max",
                    Method::Min => "min",
                };
                for e in &f.variation(which).entries {
                    let (change, amount) = match &e.change {
                        FeatureChange::Unchanged => ("unchanged", String::new()),
                        FeatureChange::Shift { delta } => ("shift", delta.to_string()),
                        FeatureChange::Set { value } => ("set", value.to_string()),
                        FeatureChange::Step { delta } => ("step", delta.to_string()),
                        FeatureChange::Replace { from, to } => ("replace", format!("{from}->{to}")),
                    };
                    let _ = writeln!(out, "{},{tag},{},{change},{amount}", csv_field(&f.name), csv_field(&e.feature));
                }
            }
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const INDEX_COLUMNS: [&str; 6] = [
    "feature",
    "value",
    "stability",
    "uncertainty",
    "uncertainty_minus",
    "uncertainty_plus",
];

pub fn indices_csv<'a>(rows: impl IntoIterator<Item = &'a ConfidenceIndices>) -> String {
    let mut out = INDEX_COLUMNS.join(",") + "\n";
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.feature),
            csv_field(&r.value.to_string()),
            r.stability,
            r.uncertainty,
            r.uncertainty_minus,
            r.uncertainty_plus
        );
    }
    out
}

pub fn indices_table<'a>(rows: impl IntoIterator<Item = &'a ConfidenceIndices>) -> String {
    let rows: Vec<&ConfidenceIndices> = rows.into_iter().collect();
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.feature.clone(),
                match &r.value {
                    FeatureValue::Real(v) => format!("{v:.2}"),
                    other => other.to_string(),
                },
                format!("{:.2}", r.stability),
                format!("{:.2}", r.uncertainty),
                format!("{:.2}", r.uncertainty_minus),
                format!("{:.2}", r.uncertainty_plus),
            ]
        })
        .collect();
    let mut widths = INDEX_COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cols: &[&str], out: &mut String| {
        let parts: Vec<String> = cols
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&INDEX_COLUMNS, &mut out);
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&refs, &mut out);
    }
    out
}
