use thiserror::Error;

/// Errors produced by ingestion, fitting, search, evaluation and simulation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("invalid time at row {row}: {value}")]
    InvalidTime { row: usize, value: String },

    #[error("invalid event flag at row {row}: {value}")]
    InvalidEventFlag { row: usize, value: String },

    #[error("invalid value at row {row}, column {column}: {value}")]
    InvalidValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column not found: {0}")]
    MissingColumn(String),

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("degenerate leaf: {deaths} deaths with zero cumulative hazard mass")]
    DegenerateLeaf { deaths: usize },

    #[error("baseline mismatch: death at time {time} has zero cumulative hazard")]
    BaselineMismatch { time: f64 },

    #[error("min bucket violation: node {node} has {count} members, minimum is {min_bucket}")]
    MinBucketViolation {
        node: usize,
        count: usize,
        min_bucket: usize,
    },

    #[error("invalid complexity parameter: {0}")]
    InvalidComplexity(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("no uncensored observations")]
    NoDeaths,

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("censoring weight degenerate at tau = {tau}; try a smaller tau")]
    CensoringWeightDegenerate { tau: f64 },

    #[error("no evaluable observations at tau = {tau}")]
    NoEvaluableAtTau { tau: f64 },

    #[error("degenerate null Brier score")]
    DegenerateNullBrier,

    #[error("degenerate null IB")]
    DegenerateNullIb,

    #[error("degenerate null area between curves")]
    DegenerateNullAbc,

    #[error("degenerate time range")]
    DegenerateTimeRange,

    #[error("degenerate horizon")]
    DegenerateHorizon,

    #[error("cox fit diverged after {iterations} iterations")]
    CoxDiverged { iterations: usize },

    #[error("infeasible truth-tree config after {attempts} attempts")]
    InfeasibleTruthTree { attempts: usize },

    #[error("unsupported noise level: {0}")]
    UnsupportedNoiseLevel(f64),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
