//! Agreement between an empirical tree and the true model: node
//! homogeneity, class recovery, similarity, and the area between the
//! estimated and true survival curves.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::survival::{CovariateMatrix, Dataset, StepFunction};
use crate::tree::SurvivalTree;

use super::truth::{ParametricDistribution, TruthModel};

/// Counts `n[k][l]` of rows in empirical node `k` with true class `l`.
/// Rows and columns are the distinct labels in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
}

fn dense(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut index = BTreeMap::new();
    for &l in labels {
        index.entry(l).or_insert(0usize);
    }
    for (k, v) in index.values_mut().enumerate() {
        *v = k;
    }
    (labels.iter().map(|l| index[l]).collect(), index.len())
}

impl ContingencyTable {
    pub fn from_labels(nodes: &[usize], classes: &[usize]) -> Result<Self> {
        if nodes.len() != classes.len() {
            return Err(Error::InvalidParams("label vectors differ in length".into()));
        }
        if nodes.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (rows, nr) = dense(nodes);
        let (cols, nc) = dense(classes);
        let mut counts = vec![vec![0u64; nc]; nr];
        for (&k, &l) in rows.iter().zip(&cols) {
            counts[k][l] += 1;
        }
        Ok(ContingencyTable { counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn transpose(&self) -> ContingencyTable {
        let nc = self.counts.first().map_or(0, Vec::len);
        let counts = (0..nc).map(|l| self.counts.iter().map(|row| row[l]).collect()).collect();
        ContingencyTable { counts }
    }
}

/// Cross-tabulation of `tree` leaves against true classes on `x`.
pub fn contingency(tree: &SurvivalTree, truth: &TruthModel, x: &CovariateMatrix) -> Result<ContingencyTable> {
    let leaves = tree.assign_leaves(x)?;
    ContingencyTable::from_labels(&leaves, &truth.classes(x))
}

/// `(1/n) sum_k sum_l n_kl^2 / n_k`.
pub fn node_homogeneity(table: &ContingencyTable) -> f64 {
    let n = table.total();
    let mut sum = 0.0;
    for row in &table.counts {
        let size: u64 = row.iter().sum();
        if size > 0 {
            let squares: u64 = row.iter().map(|c| c * c).sum();
            sum += squares as f64 / size as f64;
        }
    }
    sum / n as f64
}

/// `(1/n) sum_l sum_k n_kl^2 / n_l`, the homogeneity of the transposed
/// table.
pub fn class_recovery(table: &ContingencyTable) -> f64 {
    node_homogeneity(&table.transpose())
}

/// Mean of the two node homogeneities of `t1` and `t2` relative to each
/// other on the rows of `x`.
pub fn similarity(t1: &SurvivalTree, t2: &SurvivalTree, x: &CovariateMatrix) -> Result<f64> {
    let a = t1.assign_leaves(x)?;
    let b = t2.assign_leaves(x)?;
    similarity_of_labels(&a, &b)
}

pub fn similarity_of_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    let ab = ContingencyTable::from_labels(a, b)?;
    let ba = ContingencyTable::from_labels(b, a)?;
    Ok(0.5 * (node_homogeneity(&ab) + node_homogeneity(&ba)))
}

/// Survival curve with a known running integral.
pub trait SurvivalCurve {
    fn survival(&self, t: f64) -> f64;
    /// `int_0^t S(u) du`.
    fn integral(&self, t: f64) -> f64;

    /// `int_a^b S(u) du`.
    fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.integral(b) - self.integral(a)
    }
}

impl SurvivalCurve for ParametricDistribution {
    fn survival(&self, t: f64) -> f64 {
        ParametricDistribution::survival(self, t)
    }

    fn integral(&self, t: f64) -> f64 {
        self.survival_integral(t)
    }
}

impl SurvivalCurve for StepFunction {
    fn survival(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn integral(&self, t: f64) -> f64 {
        self.segments(t).iter().map(|&(a, b, v)| v * (b - a)).sum()
    }

    fn integral_between(&self, a: f64, b: f64) -> f64 {
        self.segments(b)
            .iter()
            .filter(|&&(_, end, _)| end > a)
            .map(|&(start, end, v)| v * (end - start.max(a)))
            .sum()
    }
}

/// Point in `[a, b]` where the nonincreasing `truth` falls to `level`:
/// above it to the left, at or below it to the right.
fn crossing<S: SurvivalCurve + ?Sized>(truth: &S, level: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if truth.survival(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(1/t_max) int_0^t_max |S_true(t) - S_hat(t)| dt`, integrated exactly on
/// each constant piece of `estimate` after locating the crossing.
pub fn abc<S: SurvivalCurve + ?Sized>(truth: &S, estimate: &StepFunction, t_max: f64) -> Result<f64> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::DegenerateHorizon);
    }
    let mut total = 0.0;
    for (a, b, s) in estimate.segments(t_max) {
        let start = truth.survival(a);
        // left limit at the end of the piece
        let end = truth.survival(b - (b - a) * 1e-12).min(start);
        let piece = if start <= s {
            s * (b - a) - truth.integral_between(a, b)
        } else if end >= s {
            truth.integral_between(a, b) - s * (b - a)
        } else {
            let c = crossing(truth, s, a, b);
            truth.integral_between(a, c) - s * (c - a) + s * (b - c) - truth.integral_between(c, b)
        };
        // the integrand is nonnegative; drop rounding residue
        total += piece.max(0.0);
    }
    Ok(total / t_max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbcReport {
    /// Area between curves per evaluation row for the tree.
    pub tree: Vec<f64>,
    /// The same for the pooled Kaplan-Meier curve of the training data.
    pub null: Vec<f64>,
    /// `1 - sum(tree) / sum(null)`.
    pub ratio: f64,
    pub t_max: f64,
}

/// Areas between curves for rows whose true curves and estimates are given
/// by index, computing each distinct (truth, estimate) pair once.
pub fn area_ratio(
    truths: &[&dyn SurvivalCurve],
    class: &[usize],
    estimates: &[&StepFunction],
    null: &StepFunction,
    t_max: f64,
) -> Result<AbcReport> {
    if class.len() != estimates.len() {
        return Err(Error::InvalidParams("class and estimate lengths differ".into()));
    }
    if class.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cache: HashMap<(usize, *const StepFunction), f64> = HashMap::new();
    let mut area = |l: usize, curve: &StepFunction| -> Result<f64> {
        let key = (l, curve as *const StepFunction);
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let v = abc(truths[l], curve, t_max)?;
        cache.insert(key, v);
        Ok(v)
    };
    let mut tree = Vec::with_capacity(class.len());
    let mut base = Vec::with_capacity(class.len());
    for (&l, &curve) in class.iter().zip(estimates) {
        tree.push(area(l, curve)?);
        base.push(area(l, null)?);
    }
    let null_sum: f64 = base.iter().sum();
    if !(null_sum > 0.0) {
        return Err(Error::DegenerateNullAbc);
    }
    let ratio = 1.0 - tree.iter().sum::<f64>() / null_sum;
    Ok(AbcReport {
        tree,
        null: base,
        ratio,
        t_max,
    })
}

/// Area between the leaf Kaplan-Meier curves of `tree` and the true
/// curves on `test`, with `t_max` the largest observed time in `test`.
/// The null model is the pooled training curve of `tree`.
pub fn area_between_curves(tree: &SurvivalTree, truth: &TruthModel, test: &Dataset) -> Result<AbcReport> {
    let leaves = tree.assign_leaves(&test.covariates)?;
    let class = truth.classes(&test.covariates);
    let t_max = test.outcomes.iter().map(|o| o.time).fold(0.0, f64::max);
    let truths: Vec<&dyn SurvivalCurve> = truth.leaf_distributions.iter().map(|d| d as &dyn SurvivalCurve).collect();
    let estimates: Vec<&StepFunction> = leaves.iter().map(|&l| &tree.leaf_fit(l).unwrap().curve).collect();
    area_ratio(&truths, &class, &estimates, tree.pooled_curve(), t_max)
}
