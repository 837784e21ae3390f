//! Naive reference implementations used as oracles by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use survtree::{CovariateMatrix, Dataset, Feature, Observation, StepFunction};

/// Integer-valued times in `1..=span` (heavy ties) with a random censoring
/// rate.
pub fn random_outcomes<R: Rng>(rng: &mut R, n: usize) -> Vec<Observation> {
    let span = rng.random_range(2..=12);
    let p_event = rng.random_range(0.2..1.0);
    (0..n)
        .map(|_| {
            let t = rng.random_range(1..=span) as f64;
            Observation::new(t, rng.random_bool(p_event)).unwrap()
        })
        .collect()
}

fn distinct_times(o: &[Observation]) -> Vec<f64> {
    let mut t: Vec<f64> = o.iter().map(|x| x.time).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

fn at_risk(o: &[Observation], s: f64) -> usize {
    o.iter().filter(|x| x.time >= s).count()
}

fn events_at(o: &[Observation], s: f64, event: bool) -> usize {
    o.iter().filter(|x| x.time == s && x.event == event).count()
}

pub fn naive_na(o: &[Observation], t: f64) -> f64 {
    let mut h = 0.0;
    for s in distinct_times(o) {
        if s <= t {
            h += events_at(o, s, true) as f64 / at_risk(o, s) as f64;
        }
    }
    h
}

fn naive_product_limit(o: &[Observation], t: f64, event: bool) -> f64 {
    let mut surv = 1.0;
    for s in distinct_times(o) {
        let d = events_at(o, s, event);
        if s <= t && d > 0 {
            surv *= 1.0 - d as f64 / at_risk(o, s) as f64;
        }
    }
    surv
}

pub fn naive_km(o: &[Observation], t: f64) -> f64 {
    naive_product_limit(o, t, true)
}

pub fn naive_censoring_km(o: &[Observation], t: f64) -> f64 {
    naive_product_limit(o, t, false)
}

/// Distinct times, midpoints between them, and points outside the range.
pub fn probe_points(o: &[Observation]) -> Vec<f64> {
    let t = distinct_times(o);
    let mut p = vec![0.0, t[0] - 0.5, t[t.len() - 1] + 1.0];
    p.extend(&t);
    p.extend(t.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    p
}

/// Deviance of a leaf from its definition: the saturated log-likelihood
/// minus the leaf log-likelihood, both at their maximizing coefficients.
pub fn naive_leaf_error(members: &[(f64, bool)]) -> f64 {
    let deaths: f64 = members.iter().filter(|m| m.1).count() as f64;
    let mass: f64 = members.iter().map(|m| m.0).sum();
    let theta = if deaths == 0.0 { 0.0 } else { deaths / mass };
    let log_lik = |h: f64, d: bool, th: f64| {
        let mut l = -h * th;
        if d {
            l += (h * th).ln();
        }
        l
    };
    members
        .iter()
        .map(|&(h, d)| {
            let sat = if d { log_lik(h, true, 1.0 / h) } else { 0.0 };
            sat - log_lik(h, d, theta)
        })
        .sum()
}

/// Dataset with continuous features `x1..` from the given columns.
pub fn dataset(columns: Vec<Vec<f64>>, outcomes: Vec<Observation>) -> Dataset {
    let features = (0..columns.len())
        .map(|j| Feature::continuous(format!("x{}", j + 1)))
        .collect();
    Dataset::new(CovariateMatrix::new(features, columns).unwrap(), outcomes).unwrap()
}

/// `n` rows of `p` integer features in `0..levels` with exponential times
/// whose rate depends on the first two features, and uniform censoring.
pub fn integer_dataset<R: Rng>(rng: &mut R, n: usize, p: usize, levels: usize) -> Dataset {
    let columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.random_range(0..levels) as f64).collect())
        .collect();
    let cut = levels as f64 / 2.0;
    let outcomes = (0..n)
        .map(|i| {
            let mut rate = 1.0;
            if columns[0][i] >= cut {
                rate *= 3.0;
            }
            if p > 1 && columns[1][i] < cut - 1.0 {
                rate *= 0.4;
            }
            let s = -(1.0 - rng.random::<f64>()).ln() / rate;
            let c = rng.random_range(0.0..2.5);
            if s <= c {
                Observation::death(s)
            } else {
                Observation::censored(c)
            }
        })
        .collect();
    dataset(columns, outcomes)
}

pub fn naive_harrell(risk: &[f64], o: &[Observation]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..o.len() {
        for i in 0..o.len() {
            if o[j].event && o[i].time > o[j].time {
                den += 1.0;
                if risk[j] > risk[i] {
                    num += 1.0;
                } else if risk[j] == risk[i] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

pub fn naive_uno(risk: &[f64], o: &[Observation], tau: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..o.len() {
        if !o[j].event || o[j].time >= tau {
            continue;
        }
        let w = naive_censoring_km(o, o[j].time).powi(-2);
        for i in 0..o.len() {
            if o[i].time > o[j].time {
                den += w;
                if risk[j] > risk[i] {
                    num += w;
                } else if risk[j] == risk[i] {
                    num += 0.5 * w;
                }
            }
        }
    }
    num / den
}

pub fn naive_brier(curves: &[&StepFunction], o: &[Observation], tau: f64) -> f64 {
    let mut terms = Vec::new();
    for (c, x) in curves.iter().zip(o) {
        if x.time > tau {
            terms.push((c.eval(tau) - 1.0).powi(2));
        } else if x.event {
            terms.push(c.eval(tau).powi(2));
        } else if x.time == tau {
            terms.push((c.eval(tau)).powi(2));
        }
    }
    terms.iter().sum::<f64>() / terms.len() as f64
}

/// Graf's integrated Brier score by midpoint rule on a grid of
/// `cells_per_unit` cells per time unit. Exact when every knot of the curves
/// and of the censoring curve lies on the grid.
pub fn grid_integrated_brier(curves: &[&StepFunction], o: &[Observation], cells_per_unit: usize) -> f64 {
    let floor = survtree::metrics::G_FLOOR;
    let t_max = o.iter().map(|x| x.time).fold(0.0, f64::max);
    let cells = (t_max * cells_per_unit as f64).round() as usize;
    let width = t_max / cells as f64;
    let mut total = 0.0;
    for (c, x) in curves.iter().zip(o) {
        let g_i = naive_censoring_km(o, x.time).max(floor);
        for k in 0..cells {
            let t = (k as f64 + 0.5) * width;
            let s = c.eval(t);
            if x.time > t {
                total += width * (1.0 - s).powi(2) / naive_censoring_km(o, t).max(floor);
            } else if x.event {
                total += width * s * s / g_i;
            }
        }
    }
    total / (o.len() as f64 * t_max)
}

/// Hazards `NA(t_i)` of every row, from the naive estimator.
pub fn naive_hazards(data: &Dataset) -> Vec<f64> {
    data.outcomes.iter().map(|o| naive_na(&data.outcomes, o.time)).collect()
}

fn rows_error(rows: &[usize], hazards: &[f64], data: &Dataset) -> f64 {
    let m: Vec<(f64, bool)> = rows.iter().map(|&i| (hazards[i], data.outcomes[i].event)).collect();
    naive_leaf_error(&m)
}

/// Lowest `error + alpha * splits` over every tree of at most `levels`
/// split levels whose leaves all hold `min_bucket` rows, found by trying
/// every threshold of every feature at every node.
pub fn exhaustive_optimum(data: &Dataset, alpha: f64, min_bucket: usize, levels: usize) -> f64 {
    let hazards = naive_hazards(data);
    let rows: Vec<usize> = (0..data.len()).collect();
    exhaustive(&rows, data, &hazards, alpha, min_bucket, levels)
}

fn exhaustive(rows: &[usize], data: &Dataset, hazards: &[f64], alpha: f64, mb: usize, levels: usize) -> f64 {
    let mut best = rows_error(rows, hazards, data);
    if levels == 0 {
        return best;
    }
    let x = &data.covariates;
    for j in 0..x.n_features() {
        let mut values: Vec<f64> = rows.iter().map(|&i| x.value(i, j)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for &b in &values[..values.len() - 1] {
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x.value(i, j) <= b);
            if left.len() < mb || right.len() < mb {
                continue;
            }
            let total = alpha
                + exhaustive(&left, data, hazards, alpha, mb, levels - 1)
                + exhaustive(&right, data, hazards, alpha, mb, levels - 1);
            best = best.min(total);
        }
    }
    best
}

/// `error + alpha * splits` of a fitted tree, recomputed from its leaf
/// partition with the naive estimators.
pub fn naive_objective(tree: &survtree::SurvivalTree, data: &Dataset, alpha: f64) -> f64 {
    let hazards = naive_hazards(data);
    let leaves = tree.assign_leaves(&data.covariates).unwrap();
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, l) in leaves.into_iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let error: f64 = groups.values().map(|rows| rows_error(rows, &hazards, data)).sum();
    error + alpha * tree.complexity() as f64
}
