//! Brier score at a single horizon and the IPCW integrated Brier score.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::survival::{censoring_km, Observation, StepFunction};

/// Floor applied to censoring survival inside IPCW denominators.
pub const G_FLOOR: f64 = 1e-6;

/// Median of the observed times (mean of the two middle values for even n).
pub fn median_time(outcomes: &[Observation]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut t: Vec<f64> = outcomes.iter().map(|o| o.time).collect();
    t.sort_by(f64::total_cmp);
    let n = t.len();
    Ok(if n % 2 == 1 {
        t[n / 2]
    } else {
        0.5 * (t[n / 2 - 1] + t[n / 2])
    })
}

/// Mean of `(S_i(tau) - 1{t_i > tau})^2` over observations with `t_i >= tau`
/// or an observed death.
pub fn brier_point(curves: &[&StepFunction], outcomes: &[Observation], tau: f64) -> Result<f64> {
    check(curves, outcomes)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (curve, o) in curves.iter().zip(outcomes) {
        if o.time >= tau || o.event {
            let alive = if o.time > tau { 1.0 } else { 0.0 };
            sum += (curve.eval(tau) - alive).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoEvaluableAtTau { tau });
    }
    Ok(sum / count as f64)
}

/// `1 - BP(T) / BP(T0)`.
pub fn brier_point_ratio(
    curves: &[&StepFunction],
    null_curves: &[&StepFunction],
    outcomes: &[Observation],
    tau: f64,
) -> Result<f64> {
    let null = brier_point(null_curves, outcomes, tau)?;
    if null <= 0.0 {
        return Err(Error::DegenerateNullBrier);
    }
    Ok(1.0 - brier_point(curves, outcomes, tau)? / null)
}

/// Running integrals of `(1 - S)^2 / G` and `S^2` over the merged knots of
/// `S` and `G` on `[0, t_max]`.
struct Cumulative {
    starts: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    first_rate: Vec<f64>,
    second_rate: Vec<f64>,
}

impl Cumulative {
    fn new(s: &StepFunction, g: &StepFunction, t_max: f64) -> Self {
        let mut starts = vec![0.0];
        starts.extend(
            s.knots()
                .iter()
                .chain(g.knots())
                .copied()
                .filter(|&k| k > 0.0 && k < t_max),
        );
        starts.sort_by(f64::total_cmp);
        starts.dedup();
        let m = starts.len();
        let mut first = Vec::with_capacity(m);
        let mut second = Vec::with_capacity(m);
        let mut first_rate = Vec::with_capacity(m);
        let mut second_rate = Vec::with_capacity(m);
        let (mut c1, mut c2) = (0.0, 0.0);
        for (k, &a) in starts.iter().enumerate() {
            let sv = s.eval(a);
            let gv = g.eval(a).max(G_FLOOR);
            let r1 = (1.0 - sv).powi(2) / gv;
            let r2 = sv * sv;
            first.push(c1);
            second.push(c2);
            first_rate.push(r1);
            second_rate.push(r2);
            let b = starts.get(k + 1).copied().unwrap_or(t_max);
            c1 += r1 * (b - a);
            c2 += r2 * (b - a);
        }
        Cumulative {
            starts,
            first,
            second,
            first_rate,
            second_rate,
        }
    }

    fn at(&self, x: f64) -> (f64, f64) {
        let k = self.starts.partition_point(|&a| a <= x).max(1) - 1;
        let dx = x - self.starts[k];
        (
            self.first[k] + self.first_rate[k] * dx,
            self.second[k] + self.second_rate[k] * dx,
        )
    }
}

/// Graf's integrated Brier score with censoring weights from the censoring
/// Kaplan-Meier curve of `outcomes`, normalized by `n * t_max`. Curves
/// shared between observations (same reference) are integrated once.
pub fn integrated_brier(curves: &[&StepFunction], outcomes: &[Observation]) -> Result<f64> {
    check(curves, outcomes)?;
    let t_max = outcomes.iter().map(|o| o.time).fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::DegenerateTimeRange);
    }
    let g = censoring_km(outcomes)?;
    let mut cache: HashMap<*const StepFunction, Cumulative> = HashMap::new();
    let mut total = 0.0;
    for (&curve, o) in curves.iter().zip(outcomes) {
        let cum = cache
            .entry(curve as *const StepFunction)
            .or_insert_with(|| Cumulative::new(curve, &g, t_max));
        let (first, second_to) = cum.at(o.time);
        total += first;
        if o.event {
            let (_, second_all) = cum.at(t_max);
            total += (second_all - second_to) / g.eval(o.time).max(G_FLOOR);
        }
    }
    Ok(total / (outcomes.len() as f64 * t_max))
}

/// `1 - IB(T) / IB(T0)`.
pub fn integrated_brier_ratio(
    curves: &[&StepFunction],
    null_curves: &[&StepFunction],
    outcomes: &[Observation],
) -> Result<f64> {
    let null = integrated_brier(null_curves, outcomes)?;
    if null <= 0.0 {
        return Err(Error::DegenerateNullIb);
    }
    Ok(1.0 - integrated_brier(curves, outcomes)? / null)
}

fn check(curves: &[&StepFunction], outcomes: &[Observation]) -> Result<()> {
    if curves.len() != outcomes.len() {
        return Err(Error::InvalidParams("curve and outcome lengths differ".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}
