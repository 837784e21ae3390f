//! Survival trees trained by coordinate descent over single-node moves, a
//! greedy baseline grower, survival-model evaluation metrics and a
//! ground-truth simulation harness.

pub mod error;
pub mod io;
pub mod metrics;
pub mod par;
pub mod search;
pub mod sim;
pub mod survival;
pub mod tree;

pub use error::{Error, Result};
pub use survival::{
    censoring_km, kaplan_meier, nelson_aalen, CovariateMatrix, Dataset, Feature, FeatureKind,
    Observation, StepFunction,
};
pub use tree::{Shape, SplitRule, SurvivalTree};
