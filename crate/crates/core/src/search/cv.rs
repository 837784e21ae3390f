//! K-fold cross-validation on held-out deviance, and automatic selection of
//! the complexity penalty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::context::Context;
use super::greedy::{grow, prune};
use super::{fit_shape, Alpha, TrainParams};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::survival::{nelson_aalen, Dataset, StepFunction};
use crate::tree::{Shape, SurvivalTree};

/// Points in the automatic penalty grid, including zero.
pub const ALPHA_GRID_POINTS: usize = 12;

const FOLD_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trainer {
    Greedy,
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvPoint {
    pub max_depth: usize,
    pub alpha: f64,
    /// Mean held-out deviance over scored folds.
    pub score: f64,
    pub folds_scored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub params: TrainParams,
    pub points: Vec<CvPoint>,
}

/// Fold index for each of `n` rows: a seeded shuffle dealt round-robin.
pub fn fold_ids(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ FOLD_SEED_SALT);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut ids = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        ids[i] = k % folds;
    }
    ids
}

fn hazard_floor(baseline: &StepFunction) -> f64 {
    baseline
        .values()
        .iter()
        .copied()
        .find(|&v| v > 0.0)
        .unwrap_or(1e-10)
}

#[inline]
fn holdout_term(hazard: f64, event: bool, theta: f64, floor: f64) -> f64 {
    let mu = hazard.max(floor) * theta;
    if event {
        let mu = mu.max(1e-10);
        -mu.ln() - 1.0 + mu
    } else {
        mu
    }
}

/// Deviance of `tree` on data it was not fitted to, using its training
/// baseline and coefficients. Baseline values below the first positive
/// training value are floored so that early deaths stay finite.
pub fn holdout_error(tree: &SurvivalTree, data: &Dataset) -> Result<f64> {
    let leaves = tree.assign_leaves(&data.covariates)?;
    let floor = hazard_floor(tree.baseline());
    Ok(data
        .outcomes
        .iter()
        .zip(leaves)
        .map(|(o, leaf)| {
            let theta = tree.leaf_fit(leaf).unwrap().theta;
            holdout_term(tree.baseline().eval(o.time), o.event, theta, floor)
        })
        .sum())
}

fn shape_holdout(ctx: &Context, shape: &Shape, val: &Dataset) -> f64 {
    let k = shape.leaves();
    let mut deaths = vec![0usize; k];
    let mut mass = vec![0.0; k];
    for i in 0..ctx.rows() {
        let leaf = shape.leaf_index(ctx.x, i);
        let (h, e) = ctx.outcome(i);
        deaths[leaf] += e as usize;
        mass[leaf] += h;
    }
    let floor = hazard_floor(&ctx.baseline);
    val.outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let leaf = shape.leaf_index(&val.covariates, i);
            let theta = if deaths[leaf] == 0 {
                0.0
            } else {
                deaths[leaf] as f64 / mass[leaf]
            };
            holdout_term(ctx.baseline.eval(o.time), o.event, theta, floor)
        })
        .sum()
}

/// Scores every `(depth, alpha)` pair by mean held-out deviance and returns
/// the best, preferring shallower trees and then larger penalties on ties.
/// Folds whose validation part has no deaths are skipped.
pub fn cross_validate(
    data: &Dataset,
    depth_grid: &[usize],
    alpha_grid: &[f64],
    folds: usize,
    base: &TrainParams,
    trainer: Trainer,
) -> Result<CvOutcome> {
    cross_validate_with(data, depth_grid, alpha_grid, folds, base, trainer, Execution::default())
}

pub fn cross_validate_with(
    data: &Dataset,
    depth_grid: &[usize],
    alpha_grid: &[f64],
    folds: usize,
    base: &TrainParams,
    trainer: Trainer,
    exec: Execution,
) -> Result<CvOutcome> {
    base.validate()?;
    if depth_grid.is_empty() || alpha_grid.is_empty() {
        return Err(Error::InvalidParams("empty cross-validation grid".into()));
    }
    if let Some(&d) = depth_grid.iter().find(|&&d| d == 0) {
        return Err(Error::InvalidParams(format!("max_depth must be at least 1, got {d}")));
    }
    if let Some(&a) = alpha_grid.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidComplexity(a));
    }
    let n = data.len();
    if folds < 2 || folds > n {
        return Err(Error::InvalidParams(format!("need 2 <= folds <= n, got folds = {folds}, n = {n}")));
    }

    let na = alpha_grid.len();
    let mut sums = vec![0.0; depth_grid.len() * na];
    let mut scored = vec![0usize; depth_grid.len() * na];
    let ids = fold_ids(n, folds, base.seed);
    for k in 0..folds {
        let (val_rows, train_rows): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ids[i] == k);
        let val = data.subset(&val_rows);
        if val.deaths() == 0 {
            log::warn!("fold {k} has no validation deaths; skipped");
            continue;
        }
        let train = data.subset(&train_rows);
        let ctx = Context::new(&train, nelson_aalen(&train.outcomes)?, base.min_bucket)?;
        let rows = ctx.all_rows();
        for (di, &depth) in depth_grid.iter().enumerate() {
            let params = TrainParams {
                max_depth: depth,
                ..base.clone()
            };
            let full = match trainer {
                Trainer::Greedy => Some(grow(&ctx, &rows, 1, depth)),
                Trainer::Optimal => None,
            };
            for (ai, &alpha) in alpha_grid.iter().enumerate() {
                let shape = match &full {
                    Some(full) => prune(&ctx, full, &rows, alpha).0,
                    None => fit_shape(&ctx, &params, alpha, exec).shape,
                };
                sums[di * na + ai] += shape_holdout(&ctx, &shape, &val);
                scored[di * na + ai] += 1;
            }
        }
    }
    if scored.iter().all(|&c| c == 0) {
        return Err(Error::InvalidParams("no fold has validation deaths".into()));
    }

    let mut points = Vec::with_capacity(sums.len());
    for (di, &depth) in depth_grid.iter().enumerate() {
        for (ai, &alpha) in alpha_grid.iter().enumerate() {
            let c = scored[di * na + ai];
            points.push(CvPoint {
                max_depth: depth,
                alpha,
                score: sums[di * na + ai] / c as f64,
                folds_scored: c,
            });
        }
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.max_depth
            .cmp(&pb.max_depth)
            .then(pb.alpha.total_cmp(&pa.alpha))
            .then(a.cmp(&b))
    });
    let mut best = order[0];
    for &i in &order[1..] {
        if points[i].score < points[best].score {
            best = i;
        }
    }
    let params = TrainParams {
        max_depth: points[best].max_depth,
        alpha: Alpha::Fixed(points[best].alpha),
        ..base.clone()
    };
    Ok(CvOutcome { params, points })
}

/// Zero followed by `ALPHA_GRID_POINTS - 1` geometric values running from
/// `0.001 * null_error / n` up to `null_error`, the scale at which every
/// split is pruned.
pub fn alpha_grid(data: &Dataset) -> Result<Vec<f64>> {
    let ctx = Context::new(data, nelson_aalen(&data.outcomes)?, 1)?;
    let null = ctx.leaf_error(&ctx.all_rows());
    if !(null > 0.0) {
        return Ok(vec![0.0]);
    }
    let lo = 0.001 * null / data.len() as f64;
    let steps = (ALPHA_GRID_POINTS - 2) as f64;
    let ratio = (null / lo).powf(1.0 / steps);
    let mut grid = vec![0.0];
    grid.extend((0..ALPHA_GRID_POINTS - 1).map(|j| lo * ratio.powi(j as i32)));
    Ok(grid)
}

/// Cross-validated penalty for the optimal trainer at `params.max_depth`.
pub fn calibrate_alpha(data: &Dataset, params: &TrainParams) -> Result<f64> {
    calibrate_alpha_with(data, params, Trainer::Optimal, None, Execution::default())
}

/// As [`calibrate_alpha`] with an explicit trainer and optional grid.
pub fn calibrate_alpha_with(
    data: &Dataset,
    params: &TrainParams,
    trainer: Trainer,
    grid: Option<&[f64]>,
    exec: Execution,
) -> Result<f64> {
    let owned;
    let grid = match grid {
        Some(g) => g,
        None => {
            owned = alpha_grid(data)?;
            &owned
        }
    };
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if data.len() < 2 * params.min_bucket {
        return Ok(0.0);
    }
    let folds = params.folds.min(data.len());
    let outcome = cross_validate_with(data, &[params.max_depth], grid, folds, params, trainer, exec)?;
    match outcome.params.alpha {
        Alpha::Fixed(a) => Ok(a),
        Alpha::Auto => unreachable!(),
    }
}
