//! Training: the greedy grower, coordinate descent from many starting
//! trees, cross-validation and automatic penalty selection.

mod context;
mod cv;
mod greedy;
mod local;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use cv::{
    alpha_grid, calibrate_alpha, calibrate_alpha_with, cross_validate, cross_validate_with, fold_ids,
    holdout_error, CvOutcome, CvPoint, Trainer, ALPHA_GRID_POINTS,
};
pub use local::{MoveKind, MoveRecord, SearchTrace};

use context::{Context, TOL};
use local::Arena;

use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::survival::{nelson_aalen, Dataset};
use crate::tree::{Shape, SplitRule, SurvivalTree};

/// Complexity penalty: a fixed value or cross-validated during training.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Alpha {
    Fixed(f64),
    #[default]
    Auto,
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Fixed(a) => write!(f, "{a}"),
            Alpha::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Alpha::Auto);
        }
        let a: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParams(format!("alpha must be a number or \"auto\", got {s:?}")))?;
        if !(a >= 0.0) || !a.is_finite() {
            return Err(Error::InvalidComplexity(a));
        }
        Ok(Alpha::Fixed(a))
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Fixed(a) => s.serialize_f64(*a),
            Alpha::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) if a >= 0.0 && a.is_finite() => Ok(Alpha::Fixed(a)),
            Raw::Num(a) => Err(serde::de::Error::custom(format!("invalid complexity parameter: {a}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    /// Maximum depth with the root at depth 1.
    pub max_depth: usize,
    pub min_bucket: usize,
    /// Random starting trees, in addition to the greedy start.
    pub restarts: usize,
    pub alpha: Alpha,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Folds used when `alpha` is calibrated.
    pub folds: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            max_depth: 4,
            min_bucket: 5,
            restarts: 10,
            alpha: Alpha::Auto,
            seed: 0,
            max_sweeps: 100,
            folds: 5,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_owned()));
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if self.min_bucket < 1 {
            return bad("min_bucket must be at least 1");
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1");
        }
        if self.max_sweeps < 1 {
            return bad("max_sweeps must be at least 1");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if let Alpha::Fixed(a) = self.alpha {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::InvalidComplexity(a));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub tree: SurvivalTree,
    /// One trace per start; index 0 starts from the greedy tree.
    pub traces: Vec<SearchTrace>,
    pub alpha: f64,
    pub objective: f64,
    /// Index of the start that produced `tree`.
    pub best_start: usize,
}

pub(crate) struct Fit {
    pub shape: Shape,
    pub objective: f64,
    pub best_start: usize,
    pub traces: Vec<SearchTrace>,
}

fn run_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64))
}

/// Descent from the pruned greedy tree and from `params.restarts` random
/// trees, keeping the lowest objective (ties to the lower start index).
pub(crate) fn fit_shape(ctx: &Context, params: &TrainParams, alpha: f64, exec: Execution) -> Fit {
    let runs = map_indexed(params.restarts + 1, exec, |k| {
        let mut rng = run_rng(params.seed, k);
        let start = if k == 0 {
            let rows = ctx.all_rows();
            let full = greedy::grow(ctx, &rows, 1, params.max_depth);
            greedy::prune(ctx, &full, &rows, alpha).0
        } else {
            greedy::random_shape(ctx, params.max_depth, &mut rng)
        };
        let mut arena = Arena::new(ctx, &start);
        let trace = arena.descend(alpha, params.max_depth, params.max_sweeps, &mut rng);
        (arena.objective(alpha), arena.root_shape(), trace)
    });
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.0 < runs[best].0 {
            best = k;
        }
    }
    let mut traces = Vec::with_capacity(runs.len());
    let mut shape = Shape::Leaf;
    let mut objective = f64::NAN;
    for (k, (obj, s, trace)) in runs.into_iter().enumerate() {
        if k == best {
            shape = s;
            objective = obj;
        }
        traces.push(trace);
    }
    Fit {
        shape,
        objective,
        best_start: best,
        traces,
    }
}

fn resolve_alpha(data: &Dataset, params: &TrainParams, trainer: Trainer, exec: Execution) -> Result<f64> {
    match params.alpha {
        Alpha::Fixed(a) => Ok(a),
        Alpha::Auto => calibrate_alpha_with(data, params, trainer, None, exec),
    }
}

/// Coordinate descent from the greedy tree and `restarts` random trees.
pub fn train(data: &Dataset, params: &TrainParams) -> Result<TrainOutput> {
    train_with(data, params, Execution::default())
}

pub fn train_with(data: &Dataset, params: &TrainParams, exec: Execution) -> Result<TrainOutput> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let alpha = resolve_alpha(data, params, Trainer::Optimal, exec)?;
    let baseline = nelson_aalen(&data.outcomes)?;
    let ctx = Context::new(data, baseline.clone(), params.min_bucket)?;
    let fit = fit_shape(&ctx, params, alpha, exec);
    let tree = SurvivalTree::build_with_baseline(&fit.shape, data, baseline, alpha, params.min_bucket)?;
    Ok(TrainOutput {
        tree,
        traces: fit.traces,
        alpha,
        objective: fit.objective,
        best_start: fit.best_start,
    })
}

/// Top-down greedy tree, pruned optimally at the (possibly calibrated)
/// penalty.
pub fn greedy_grow(data: &Dataset, params: &TrainParams) -> Result<SurvivalTree> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let alpha = resolve_alpha(data, params, Trainer::Greedy, Execution::default())?;
    let baseline = nelson_aalen(&data.outcomes)?;
    let ctx = Context::new(data, baseline.clone(), params.min_bucket)?;
    let rows = ctx.all_rows();
    let full = greedy::grow(&ctx, &rows, 1, params.max_depth);
    let shape = greedy::prune(&ctx, &full, &rows, alpha).0;
    SurvivalTree::build_with_baseline(&shape, data, baseline, alpha, params.min_bucket)
}

/// Descends from `start` at penalty `alpha` using the start tree's baseline.
pub fn local_search<R: Rng + ?Sized>(
    start: &SurvivalTree,
    data: &Dataset,
    params: &TrainParams,
    alpha: f64,
    rng: &mut R,
) -> Result<(SurvivalTree, SearchTrace)> {
    params.validate()?;
    if !(alpha >= 0.0) {
        return Err(Error::InvalidComplexity(alpha));
    }
    start.check_schema(&data.covariates)?;
    let ctx = Context::new(data, start.baseline().clone(), params.min_bucket)?;
    let start_shape = start.shape();
    if ctx.shape_error(&start_shape, &ctx.all_rows()).is_none() {
        return Err(Error::InvalidParams("start tree violates min_bucket on this data".into()));
    }
    let mut arena = Arena::new(&ctx, &start_shape);
    let trace = arena.descend(alpha, params.max_depth, params.max_sweeps, rng);
    let tree = SurvivalTree::build_with_baseline(
        &arena.root_shape(),
        data,
        start.baseline().clone(),
        alpha,
        params.min_bucket,
    )?;
    Ok((tree, trace))
}

/// Best error-reducing split of the rows `members`, with the reduction it
/// achieves.
pub fn best_split(members: &[usize], data: &Dataset, min_bucket: usize) -> Result<Option<(SplitRule, f64)>> {
    let ctx = Context::new(data, nelson_aalen(&data.outcomes)?, min_bucket)?;
    let rows: Vec<u32> = members.iter().map(|&i| i as u32).collect();
    let Some(c) = ctx.best_rule(&rows, &Shape::Leaf, &Shape::Leaf) else {
        return Ok(None);
    };
    let leaf = ctx.leaf_error(&rows);
    let split = ctx
        .shape_error(&Shape::split(c.rule.clone(), Shape::Leaf, Shape::Leaf), &rows)
        .unwrap_or(f64::INFINITY);
    Ok((split < leaf - TOL).then(|| (c.rule, leaf - split)))
}

/// Random starting tree, fitted on `data`.
pub fn random_start_tree<R: Rng + ?Sized>(data: &Dataset, params: &TrainParams, rng: &mut R) -> Result<SurvivalTree> {
    params.validate()?;
    let baseline = nelson_aalen(&data.outcomes)?;
    let ctx = Context::new(data, baseline.clone(), params.min_bucket)?;
    let shape = greedy::random_shape(&ctx, params.max_depth, rng);
    let alpha = match params.alpha {
        Alpha::Fixed(a) => a,
        Alpha::Auto => 0.0,
    };
    SurvivalTree::build_with_baseline(&shape, data, baseline, alpha, params.min_bucket)
}
