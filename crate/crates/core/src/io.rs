//! CSV ingestion with an optional JSON schema sidecar declaring categorical
//! columns:
//!
//! ```json
//! {"stage": {"kind": "categorical", "levels": ["I", "II", "III"], "ordered": true}}
//! ```
//!
//! Columns not named in the sidecar are continuous. Row numbers in errors are
//! 1-based and count data rows only.

use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::survival::{CovariateMatrix, Dataset, Feature, FeatureKind, Observation};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ColumnSpec {
    Continuous,
    Categorical {
        levels: Vec<String>,
        #[serde(default)]
        ordered: bool,
    },
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub time_column: String,
    pub event_column: String,
    pub columns: BTreeMap<String, ColumnSpec>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            time_column: "time".into(),
            event_column: "event".into(),
            columns: BTreeMap::new(),
        }
    }
}

impl IngestConfig {
    /// Reads the column sidecar; time/event column names keep their defaults.
    pub fn from_schema_json<R: Read>(reader: R) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_reader(reader);
        let columns: BTreeMap<String, ColumnSpec> = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::Parse {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        Ok(IngestConfig {
            columns,
            ..IngestConfig::default()
        })
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

pub fn load_dataset<R: Read>(source: R, config: &IngestConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let time_idx = find(&config.time_column)?;
    let event_idx = find(&config.event_column)?;
    for name in config.columns.keys() {
        find(name)?;
    }

    let mut features = Vec::new();
    let mut feature_cols = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if idx == time_idx || idx == event_idx {
            continue;
        }
        let kind = match config.columns.get(name) {
            None | Some(ColumnSpec::Continuous) => FeatureKind::Continuous,
            Some(ColumnSpec::Categorical { levels, ordered }) => FeatureKind::Categorical {
                levels: levels.clone(),
                ordered: *ordered,
            },
        };
        let feature = Feature {
            name: name.clone(),
            kind,
        };
        feature.validate()?;
        features.push(feature);
        feature_cols.push(idx);
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); features.len()];
    let mut outcomes = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |idx: usize| -> Result<&str> {
            let value = record.get(idx).unwrap_or("");
            if is_missing(value) {
                Err(Error::MissingValue {
                    row,
                    column: headers[idx].clone(),
                })
            } else {
                Ok(value)
            }
        };

        let raw_time = cell(time_idx)?;
        let time: f64 = raw_time.parse().map_err(|_| Error::InvalidTime {
            row,
            value: raw_time.to_owned(),
        })?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidTime {
                row,
                value: raw_time.to_owned(),
            });
        }
        let raw_event = cell(event_idx)?;
        let event = match raw_event {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::InvalidEventFlag {
                    row,
                    value: other.to_owned(),
                })
            }
        };
        outcomes.push(Observation { time, event });

        for (f, (&idx, feature)) in feature_cols.iter().zip(&features).enumerate() {
            let raw = cell(idx)?;
            let invalid = || Error::InvalidValue {
                row,
                column: feature.name.clone(),
                value: raw.to_owned(),
            };
            let value = match &feature.kind {
                FeatureKind::Continuous => {
                    let v: f64 = raw.parse().map_err(|_| invalid())?;
                    if !v.is_finite() {
                        return Err(invalid());
                    }
                    v
                }
                FeatureKind::Categorical { levels, .. } => {
                    levels.iter().position(|l| l == raw).ok_or_else(invalid)? as f64
                }
            };
            columns[f].push(value);
        }
    }

    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let covariates = if features.is_empty() {
        return Err(Error::Schema("no covariate columns".into()));
    } else {
        CovariateMatrix::new(features, columns)?
    };
    Dataset::new(covariates, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(csv: &str) -> Result<Dataset> {
        load_dataset(csv.as_bytes(), &IngestConfig::default())
    }

    #[test]
    fn parses_simple_csv() {
        let data = load("time,event,x1\n1.5,1,0.2\n2,0,0.4\n3,1,0.9\n").unwrap();
        assert_eq!(data.len(), 3);
        assert_eq!(data.covariates.n_features(), 1);
        assert_eq!(data.outcomes[1], Observation::censored(2.0));
        assert_eq!(data.covariates.value(2, 0), 0.9);
    }

    #[test]
    fn rejects_bad_event_flag() {
        let err = load("time,event,x1\n1,2,0.2\n").unwrap_err();
        assert!(err.to_string().starts_with("invalid event flag"), "{err}");
    }

    #[test]
    fn rejects_missing_cell() {
        let err = load("time,event,x1\n1,1,\n").unwrap_err();
        assert!(err.to_string().starts_with("missing value"), "{err}");
        assert!(err.to_string().contains("row 1, column x1"), "{err}");
    }

    #[test]
    fn rejects_negative_time() {
        let err = load("time,event,x1\n-1,1,0.3\n").unwrap_err();
        assert!(err.to_string().starts_with("invalid time"), "{err}");
    }

    #[test]
    fn categorical_schema_maps_levels() {
        let schema = r#"{"stage": {"kind": "categorical", "levels": ["I", "II", "III"], "ordered": true}}"#;
        let config = IngestConfig::from_schema_json(schema.as_bytes()).unwrap();
        let data = load_dataset("time,event,stage\n1,1,II\n2,0,I\n".as_bytes(), &config).unwrap();
        assert_eq!(data.covariates.column(0), &[1.0, 0.0]);
        assert_eq!(data.features()[0].level_count(), Some(3));

        let err = load_dataset("time,event,stage\n1,1,IV\n".as_bytes(), &config).unwrap_err();
        assert!(err.to_string().contains("invalid value"), "{err}");
    }

    #[test]
    fn malformed_schema_reports_path() {
        let err = IngestConfig::from_schema_json(r#"{"a": {"kind": "categorical", "levels": 3}}"#.as_bytes())
            .unwrap_err();
        match err {
            Error::Parse { path, .. } => assert!(path.contains('a'), "{path}"),
            other => panic!("unexpected {other}"),
        }
    }
}
