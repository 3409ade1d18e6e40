//! CSV datasets with a JSON schema sidecar, and observation parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature::{Dataset, FeatureSpec, FeatureValue, Observation, Schema};

/// `{"features": [...], "label": "label"}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSidecar {
    pub features: Vec<FeatureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

pub const DEFAULT_LABEL: &str = "label";

/// `data.csv` -> `data.schema.json`
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.schema.json"))
}

pub fn read_sidecar(path: &Path) -> Result<SchemaSidecar> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::data(path.display().to_string(), e.to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

fn parse_label(raw: &str, context: impl Fn() -> String) -> Result<u8> {
    match raw.trim() {
        "0" | "0.0" | "false" => Ok(0),
        "1" | "1.0" | "true" => Ok(1),
        "" => Err(Error::data(context(), "missing class label")),
        other => Err(Error::data(context(), format!("class label `{other}` is not 0 or 1"))),
    }
}

/// Reads a CSV whose header names every sidecar feature (extra columns are
/// ignored). Empty cells are an error.
pub fn read_dataset(csv: &Path, sidecar: Option<&Path>) -> Result<Dataset> {
    let sidecar_file = sidecar.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(csv));
    let side = read_sidecar(&sidecar_file)?;
    let schema = Schema::new(side.features)?;
    let mut reader = csv::Reader::from_path(csv)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let columns = schema
        .features()
        .iter()
        .map(|f| {
            find(&f.name).ok_or_else(|| Error::SchemaMismatch(format!("column `{}` not found in {}", f.name, csv.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let label_name = side.label.as_deref().unwrap_or(DEFAULT_LABEL);
    let label_col = find(label_name);
    if side.label.is_some() && label_col.is_none() {
        return Err(Error::SchemaMismatch(format!("label column `{label_name}` not found")));
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let context = || format!("{}:{line}", csv.display());
        let values = schema
            .features()
            .iter()
            .zip(&columns)
            .map(|(spec, &c)| {
                spec.parse_value(record.get(c).unwrap_or(""))
                    .map_err(|e| Error::data(context(), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observation::new(values));
        if let Some(c) = label_col {
            labels.push(parse_label(record.get(c).unwrap_or(""), context)?);
        }
    }
    Dataset::new(schema, rows, label_col.map(|_| labels))
}

/// Reads a CSV with every column continuous (no sidecar), such as the raw
/// housing table.
pub fn read_numeric_csv(csv: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(csv)?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let schema = Schema::new(header.iter().map(FeatureSpec::continuous).collect())?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let values = schema
            .features()
            .iter()
            .enumerate()
            .map(|(c, spec)| {
                spec.parse_value(record.get(c).unwrap_or(""))
                    .map_err(|e| Error::data(format!("{}:{}", csv.display(), i + 2), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Observation::new(values));
    }
    Dataset::new(schema, rows, None)
}

/// Writes `data` as CSV (label column last, if any) plus its sidecar next to it.
pub fn write_dataset(data: &Dataset, csv: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(csv)?;
    let mut header: Vec<&str> = data.schema().names().collect();
    if data.labels().is_some() {
        header.push(DEFAULT_LABEL);
    }
    writer.write_record(&header)?;
    for (i, row) in data.rows().iter().enumerate() {
        let mut record: Vec<String> = row.values().iter().map(FeatureValue::to_string).collect();
        if let Some(labels) = data.labels() {
            record.push(labels[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    let side = SchemaSidecar {
        features: data.schema().features().to_vec(),
        label: data.labels().map(|_| DEFAULT_LABEL.to_string()),
    };
    std::fs::write(sidecar_path(csv), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Parses `name=value` pairs into an observation; every feature is required.
pub fn parse_observation<S: AsRef<str>>(schema: &Schema, pairs: &[S]) -> Result<Observation> {
    let parsed = pairs
        .iter()
        .map(|p| {
            let p = p.as_ref();
            let (name, raw) = p
                .split_once('=')
                .ok_or_else(|| Error::data("observation", format!("expected name=value, got `{p}`")))?;
            let idx = schema.require(name.trim())?;
            Ok((name.trim().to_string(), schema.feature(idx).parse_value(raw)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Observation::from_named(schema, parsed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> Dataset {
        let schema = Schema::new(vec![
            FeatureSpec::continuous("x"),
            FeatureSpec::integer("k"),
            FeatureSpec::binary("b"),
            FeatureSpec::ordinal("o", 0, 4),
            FeatureSpec::categorical("c", ["NE", "SW"]),
        ])
        .unwrap();
        let rows = vec![
            Observation::new(vec![
                FeatureValue::Real(0.1),
                FeatureValue::Int(3),
                FeatureValue::Int(1),
                FeatureValue::Int(4),
                FeatureValue::Label("SW".into()),
            ]),
            Observation::new(vec![
                FeatureValue::Real(-2.5e-7),
                FeatureValue::Int(-1),
                FeatureValue::Int(0),
                FeatureValue::Int(0),
                FeatureValue::Label("NE".into()),
            ]),
        ];
        Dataset::new(schema, rows, Some(vec![1, 0])).unwrap()
    }

    #[test]
    fn write_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.csv");
        let data = mixed();
        write_dataset(&data, &path).unwrap();
        assert!(dir.path().join("mixed.schema.json").exists());
        assert_eq!(read_dataset(&path, None).unwrap(), data);
    }

    #[test]
    fn empty_cell_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,label\n0.5,1\n,0\n").unwrap();
        std::fs::write(dir.path().join("d.schema.json"), r#"{"features":[{"name":"x","kind":"continuous"}],"label":"label"}"#).unwrap();
        let err = read_dataset(&path, None).unwrap_err();
        assert!(err.to_string().contains(":3"), "{err}");
    }

    #[test]
    fn missing_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "y\n0.5\n").unwrap();
        std::fs::write(dir.path().join("d.schema.json"), r#"{"features":[{"name":"x","kind":"continuous"}]}"#).unwrap();
        assert!(matches!(read_dataset(&path, None), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn observation_pairs() {
        let schema = mixed().schema().clone();
        let obs = parse_observation(&schema, &["x=0.5", "k=2", "b=0", "o=3", "c=NE"]).unwrap();
        assert_eq!(obs.get(4), &FeatureValue::Label("NE".into()));
        assert!(matches!(parse_observation(&schema, &["x=0.5"]), Err(Error::MissingFeature(_))));
        assert!(parse_observation(&schema, &["x=0.5", "k=2", "b=0", "o=3", "c=XX"]).is_err());
        assert!(matches!(parse_observation(&schema, &["zz=1"]), Err(Error::UnknownFeature(_))));
    }

    #[test]
    fn numeric_csv_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.csv");
        std::fs::write(&path, "a,b\n1,2.5\n3,4\n").unwrap();
        let data = read_numeric_csv(&path).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.rows()[0], Observation::from_reals(&[1.0, 2.5]));
    }
}
