//! Survival-model evaluation: Cox partial likelihood, concordance, Brier
//! scores, and ratios against the single-leaf null model.

mod brier;
mod concordance;
mod cox;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use brier::{
    brier_point, brier_point_ratio, integrated_brier, integrated_brier_ratio, median_time, G_FLOOR,
};
pub use concordance::{harrell_c, pair_counts, uno_c, PairCounts};
pub use cox::{cox_fit, cox_score_ratio, null_log_lik, CoxFit};

use crate::error::Result;
use crate::survival::{CovariateMatrix, Dataset, StepFunction};
use crate::tree::SurvivalTree;

/// Leaf membership and risk score (leaf coefficient) per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskAssignment {
    pub leaf: Vec<usize>,
    pub risk: Vec<f64>,
}

impl RiskAssignment {
    pub fn from_tree(tree: &SurvivalTree, x: &CovariateMatrix) -> Result<Self> {
        let leaf = tree.assign_leaves(x)?;
        let risk = leaf.iter().map(|&l| tree.leaf_fit(l).unwrap().theta).collect();
        Ok(RiskAssignment { leaf, risk })
    }

    /// Leaf ids renumbered densely from zero in increasing id order.
    pub fn groups(&self) -> Vec<usize> {
        let ids: BTreeSet<usize> = self.leaf.iter().copied().collect();
        let index: BTreeMap<usize, usize> = ids.into_iter().enumerate().map(|(k, l)| (l, k)).collect();
        self.leaf.iter().map(|l| index[l]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cox_score: f64,
    pub csr: f64,
    pub harrell_c: f64,
    pub uno_c: f64,
    pub bp: f64,
    pub bpr: f64,
    pub ib: f64,
    pub ibr: f64,
    pub tau: f64,
    pub t_max: f64,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "cox_score,csr,harrell_c,uno_c,bp,bpr,ib,ibr,tau,t_max";

    pub fn to_csv(&self) -> String {
        format!(
            "{}\n{},{},{},{},{},{},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.cox_score,
            self.csr,
            self.harrell_c,
            self.uno_c,
            self.bp,
            self.bpr,
            self.ib,
            self.ibr,
            self.tau,
            self.t_max
        )
    }
}

/// Full metric suite of `tree` on `data`. The null model predicts the
/// tree's pooled training Kaplan-Meier curve for everyone. `tau` defaults to
/// the median observed time of `data`.
pub fn evaluate(tree: &SurvivalTree, data: &Dataset, tau: Option<f64>) -> Result<MetricReport> {
    let assignment = RiskAssignment::from_tree(tree, &data.covariates)?;
    let outcomes = &data.outcomes;
    let tau = match tau {
        Some(t) => t,
        None => median_time(outcomes)?,
    };
    let t_max = outcomes.iter().map(|o| o.time).fold(0.0, f64::max);

    let fit = cox_fit(&assignment.groups(), outcomes)?;
    let null_ll = null_log_lik(outcomes)?;
    let csr = if null_ll == 0.0 { 0.0 } else { 1.0 - fit.log_lik / null_ll };

    let curves: Vec<&StepFunction> = assignment
        .leaf
        .iter()
        .map(|&l| &tree.leaf_fit(l).unwrap().curve)
        .collect();
    let null_curves = vec![tree.pooled_curve(); outcomes.len()];
    let bp = brier_point(&curves, outcomes, tau)?;
    let ib = integrated_brier(&curves, outcomes)?;

    Ok(MetricReport {
        cox_score: fit.log_lik,
        csr,
        harrell_c: harrell_c(&assignment.risk, outcomes)?,
        uno_c: uno_c(&assignment.risk, outcomes, tau)?,
        bp,
        bpr: brier_point_ratio(&curves, &null_curves, outcomes, tau)?,
        ib,
        ibr: integrated_brier_ratio(&curves, &null_curves, outcomes)?,
        tau,
        t_max,
    })
}
