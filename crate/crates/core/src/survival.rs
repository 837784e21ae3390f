//! Right-censored observations, covariates, and the nonparametric estimators
//! (Nelson-Aalen, Kaplan-Meier, censoring Kaplan-Meier) every other module
//! builds on.
//!
//! Ties between a death and a censoring at the same time are resolved by
//! processing the death first: the censored subject is still in the risk set
//! of the tied death.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(time, event)` outcome. `event == true` is an observed death.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub event: bool,
}

impl Observation {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidTime {
                row: 0,
                value: time.to_string(),
            });
        }
        Ok(Observation { time, event })
    }

    pub fn death(time: f64) -> Self {
        Observation { time, event: true }
    }

    pub fn censored(time: f64) -> Self {
        Observation { time, event: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical { levels: Vec<String>, ordered: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn continuous(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Continuous,
        }
    }

    /// Categorical feature whose levels are named `"0"`, `"1"`, ...
    pub fn categorical(name: impl Into<String>, level_count: usize, ordered: bool) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical {
                levels: (0..level_count).map(|l| l.to_string()).collect(),
                ordered,
            },
        }
    }

    pub fn level_count(&self) -> Option<usize> {
        match &self.kind {
            FeatureKind::Continuous => None,
            FeatureKind::Categorical { levels, .. } => Some(levels.len()),
        }
    }

    /// True for features split by `value <= threshold` (continuous and
    /// ordered categorical).
    pub fn is_ordered(&self) -> bool {
        match &self.kind {
            FeatureKind::Continuous => true,
            FeatureKind::Categorical { ordered, .. } => *ordered,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(count) = self.level_count() {
            if count < 2 {
                return Err(Error::Schema(format!(
                    "categorical feature {} needs at least 2 levels",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Checks a cell value against this feature's kind.
    pub fn accepts(&self, value: f64) -> bool {
        match self.level_count() {
            None => value.is_finite(),
            Some(count) => value >= 0.0 && value.fract() == 0.0 && (value as usize) < count,
        }
    }
}

/// Column-major `n x p` covariate grid. Categorical cells hold the level
/// index as an `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateMatrix {
    features: Vec<Feature>,
    columns: Vec<Vec<f64>>,
    rows: usize,
}

impl CovariateMatrix {
    pub fn new(features: Vec<Feature>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != columns.len() {
            return Err(Error::Schema(format!(
                "{} features declared for {} columns",
                features.len(),
                columns.len()
            )));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for (feature, column) in features.iter().zip(&columns) {
            feature.validate()?;
            if column.len() != rows {
                return Err(Error::Schema(format!(
                    "column {} has {} rows, expected {rows}",
                    feature.name,
                    column.len()
                )));
            }
            if let Some(row) = column.iter().position(|&v| !feature.accepts(v)) {
                return Err(Error::InvalidValue {
                    row,
                    column: feature.name.clone(),
                    value: column[row].to_string(),
                });
            }
        }
        Ok(CovariateMatrix {
            features,
            columns,
            rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> CovariateMatrix {
        CovariateMatrix {
            features: self.features.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            rows: rows.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariates: CovariateMatrix,
    pub outcomes: Vec<Observation>,
}

impl Dataset {
    pub fn new(covariates: CovariateMatrix, outcomes: Vec<Observation>) -> Result<Self> {
        if covariates.rows() != outcomes.len() {
            return Err(Error::Schema(format!(
                "{} covariate rows for {} outcomes",
                covariates.rows(),
                outcomes.len()
            )));
        }
        Ok(Dataset {
            covariates,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        self.covariates.features()
    }

    pub fn deaths(&self) -> usize {
        self.outcomes.iter().filter(|o| o.event).count()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            covariates: self.covariates.select_rows(rows),
            outcomes: rows.iter().map(|&r| self.outcomes[r]).collect(),
        }
    }
}

/// Right-continuous piecewise-constant curve on `[0, inf)`.
///
/// The value on `[0, knots[0])` is `initial`; on `[knots[k], knots[k+1])` it
/// is `values[k]`; past the last knot the last value carries forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    initial: f64,
}

impl StepFunction {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, initial: f64) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "step function has {} knots and {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidParams(
                "step function knots must be finite and strictly increasing".into(),
            ));
        }
        Ok(StepFunction {
            knots,
            values,
            initial,
        })
    }

    pub fn constant(value: f64) -> Self {
        StepFunction {
            knots: Vec::new(),
            values: Vec::new(),
            initial: value,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k <= t) {
            0 => self.initial,
            i => self.values[i - 1],
        }
    }

    /// Value just before `t` (left limit).
    pub fn eval_left(&self, t: f64) -> f64 {
        match self.knots.partition_point(|&k| k < t) {
            0 => self.initial,
            i => self.values[i - 1],
        }
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Constant pieces `(start, end, value)` covering `[0, horizon)`.
    pub fn segments(&self, horizon: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.knots.len() + 1);
        let mut start = 0.0;
        let mut value = self.initial;
        for (&k, &v) in self.knots.iter().zip(&self.values) {
            if k >= horizon {
                break;
            }
            if k > start {
                out.push((start, k, value));
            }
            start = k;
            value = v;
        }
        if horizon > start {
            out.push((start, horizon, value));
        }
        out
    }
}

/// Distinct times in ascending order with `(deaths, censorings, at_risk)`.
fn risk_table(outcomes: &[Observation]) -> Vec<(f64, usize, usize, usize)> {
    let mut sorted: Vec<Observation> = outcomes.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    let n = sorted.len();
    let mut table = Vec::new();
    let mut i = 0;
    while i < n {
        let t = sorted[i].time;
        let mut deaths = 0;
        let mut censored = 0;
        let mut j = i;
        while j < n && sorted[j].time == t {
            if sorted[j].event {
                deaths += 1;
            } else {
                censored += 1;
            }
            j += 1;
        }
        table.push((t, deaths, censored, n - i));
        i = j;
    }
    table
}

/// Nelson-Aalen cumulative hazard: jumps of `d_t / n_t` at each distinct
/// death time.
pub fn nelson_aalen(outcomes: &[Observation]) -> Result<StepFunction> {
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut cumulative = 0.0;
    for (t, deaths, _, at_risk) in risk_table(outcomes) {
        if deaths > 0 {
            cumulative += deaths as f64 / at_risk as f64;
            knots.push(t);
            values.push(cumulative);
        }
    }
    StepFunction::new(knots, values, 0.0)
}

/// Kaplan-Meier product-limit survival estimate.
pub fn kaplan_meier(outcomes: &[Observation]) -> Result<StepFunction> {
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(product_limit(risk_table(outcomes).into_iter().map(|(t, d, _, n)| (t, d, n))))
}

/// Kaplan-Meier estimate of the censoring distribution (event flags flipped).
pub fn censoring_km(outcomes: &[Observation]) -> Result<StepFunction> {
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(product_limit(risk_table(outcomes).into_iter().map(|(t, _, c, n)| (t, c, n))))
}

fn product_limit(rows: impl Iterator<Item = (f64, usize, usize)>) -> StepFunction {
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut survival = 1.0;
    for (t, events, at_risk) in rows {
        if events > 0 {
            survival *= 1.0 - events as f64 / at_risk as f64;
            knots.push(t);
            values.push(survival);
        }
    }
    StepFunction {
        knots,
        values,
        initial: 1.0,
    }
}
