//! Cox partial likelihood with one indicator per leaf, Breslow ties.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::survival::Observation;

pub const MAX_ITERATIONS: usize = 100;
const SEPARATION_BETA: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoxFit {
    /// Maximized log partial likelihood.
    pub log_lik: f64,
    /// Coefficient per group; the reference group is fixed at zero.
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some coefficient is drifting to infinity (a group with no deaths or
    /// all early deaths); `log_lik` is then the supremum approached.
    pub separated: bool,
}

/// Deaths and at-risk counts per group at each distinct death time.
struct RiskSets {
    groups: usize,
    /// (deaths at t, at-risk count per group)
    times: Vec<(f64, Vec<f64>)>,
    deaths_per_group: Vec<f64>,
}

fn risk_sets(groups: &[usize], outcomes: &[Observation]) -> RiskSets {
    let k = groups.iter().max().map_or(0, |m| m + 1);
    let mut order: Vec<usize> = (0..outcomes.len()).collect();
    order.sort_by(|&a, &b| outcomes[b].time.total_cmp(&outcomes[a].time));
    let mut at_risk = vec![0.0; k];
    let mut deaths_per_group = vec![0.0; k];
    let mut times = Vec::new();
    let mut w = 0;
    while w < order.len() {
        let t = outcomes[order[w]].time;
        let mut d = 0.0;
        let mut end = w;
        while end < order.len() && outcomes[order[end]].time == t {
            let i = order[end];
            at_risk[groups[i]] += 1.0;
            if outcomes[i].event {
                d += 1.0;
                deaths_per_group[groups[i]] += 1.0;
            }
            end += 1;
        }
        if d > 0.0 {
            times.push((d, at_risk.clone()));
        }
        w = end;
    }
    RiskSets {
        groups: k,
        times,
        deaths_per_group,
    }
}

impl RiskSets {
    fn log_lik(&self, beta: &[f64]) -> f64 {
        let linear: f64 = self.deaths_per_group.iter().zip(beta).map(|(d, b)| d * b).sum();
        let mut penalty = 0.0;
        for (d, r) in &self.times {
            let s0: f64 = r.iter().zip(beta).map(|(n, b)| n * b.exp()).sum();
            penalty += d * s0.ln();
        }
        linear - penalty
    }

    /// Gradient and negative Hessian over the free coefficients (all groups
    /// but `reference`).
    fn derivatives(&self, beta: &[f64], free: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let m = free.len();
        let mut grad = DVector::from_iterator(m, free.iter().map(|&g| self.deaths_per_group[g]));
        let mut info = DMatrix::zeros(m, m);
        let mut p = vec![0.0; m];
        for (d, r) in &self.times {
            let s0: f64 = r.iter().zip(beta).map(|(n, b)| n * b.exp()).sum();
            for (a, &g) in free.iter().enumerate() {
                p[a] = r[g] * beta[g].exp() / s0;
            }
            for a in 0..m {
                grad[a] -= d * p[a];
                info[(a, a)] += d * p[a];
                for b in 0..m {
                    info[(a, b)] -= d * p[a] * p[b];
                }
            }
        }
        (grad, info)
    }
}

/// Log partial likelihood at `beta = 0`: `-sum_t d_t ln(n_t)`.
pub fn null_log_lik(outcomes: &[Observation]) -> Result<f64> {
    if !outcomes.iter().any(|o| o.event) {
        return Err(Error::NoDeaths);
    }
    let groups = vec![0; outcomes.len()];
    Ok(risk_sets(&groups, outcomes).log_lik(&[0.0]))
}

/// Fits the per-group Cox model by damped Newton iteration.
pub fn cox_fit(groups: &[usize], outcomes: &[Observation]) -> Result<CoxFit> {
    if groups.len() != outcomes.len() {
        return Err(Error::InvalidParams("group and outcome lengths differ".into()));
    }
    if !outcomes.iter().any(|o| o.event) {
        return Err(Error::NoDeaths);
    }
    let sets = risk_sets(groups, outcomes);
    let k = sets.groups;
    let mut counts = vec![0usize; k];
    for &g in groups {
        counts[g] += 1;
    }
    // largest group is the reference; empty groups are left at zero
    let reference = (0..k).max_by_key(|&g| (counts[g], std::cmp::Reverse(g))).unwrap();
    let free: Vec<usize> = (0..k).filter(|&g| g != reference && counts[g] > 0).collect();

    let mut beta = vec![0.0; k];
    let mut ll = sets.log_lik(&beta);
    if free.is_empty() {
        return Ok(CoxFit {
            log_lik: ll,
            beta,
            iterations: 0,
            converged: true,
            separated: false,
        });
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (grad, info) = sets.derivatives(&beta, &free);
        let step = match info.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => match info.lu().solve(&grad) {
                Some(s) => s,
                None => grad.clone(),
            },
        };
        let mut scale = 1.0;
        let mut next = beta.clone();
        let mut next_ll = f64::NEG_INFINITY;
        for _ in 0..40 {
            for (a, &g) in free.iter().enumerate() {
                next[g] = beta[g] + scale * step[a];
            }
            next_ll = sets.log_lik(&next);
            if next_ll >= ll {
                break;
            }
            scale *= 0.5;
        }
        if !(next_ll >= ll) {
            converged = true;
            break;
        }
        let gain = next_ll - ll;
        beta = next;
        ll = next_ll;
        if gain <= 1e-12 * (1.0 + ll.abs()) {
            converged = true;
            break;
        }
    }
    let separated = beta.iter().any(|b| b.abs() > SEPARATION_BETA);
    if !converged {
        log::warn!("{}", Error::CoxDiverged { iterations });
    }
    Ok(CoxFit {
        log_lik: ll,
        beta,
        iterations,
        converged,
        separated,
    })
}

/// `1 - l(T) / l(T0)`; zero when the null likelihood is zero.
pub fn cox_score_ratio(groups: &[usize], outcomes: &[Observation]) -> Result<f64> {
    let fit = cox_fit(groups, outcomes)?;
    let null = null_log_lik(outcomes)?;
    if null == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - fit.log_lik / null)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(rows: &[(f64, bool)]) -> Vec<Observation> {
        rows.iter().map(|&(t, e)| Observation::new(t, e).unwrap()).collect()
    }

    #[test]
    fn single_group_is_null() {
        let o = obs(&[(1.0, true), (2.0, false), (3.0, true), (3.0, true), (4.0, true)]);
        let fit = cox_fit(&[0; 5], &o).unwrap();
        let expected = -(5f64.ln() + 2.0 * 3f64.ln() + 1f64.ln());
        assert!((fit.log_lik - expected).abs() < 1e-12);
        assert_eq!(fit.beta, vec![0.0]);
        assert_eq!(cox_score_ratio(&[0; 5], &o).unwrap(), 0.0);
    }

    #[test]
    fn matches_grid_maximum() {
        let o = obs(&[(1.0, true), (2.0, true), (3.0, false), (4.0, true), (5.0, true), (6.0, false)]);
        let groups = [1, 0, 1, 0, 1, 0];
        let fit = cox_fit(&groups, &o).unwrap();
        let sets = risk_sets(&groups, &o);
        let mut best = f64::NEG_INFINITY;
        let mut b = -5.0;
        while b <= 5.0 {
            // group 0 vs group 1 sizes tie, so reference is group 0
            best = best.max(sets.log_lik(&[0.0, b]));
            b += 1e-4;
        }
        assert!(fit.log_lik >= best - 1e-9, "{} < {best}", fit.log_lik);
        assert!(fit.log_lik - best < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn dominates_zero_coefficients() {
        let o = obs(&[(1.0, true), (1.0, true), (2.0, false), (3.0, true), (5.0, true), (8.0, true), (9.0, false)]);
        let groups = [0, 2, 1, 1, 2, 0, 1];
        let fit = cox_fit(&groups, &o).unwrap();
        assert!(fit.log_lik >= null_log_lik(&o).unwrap());
    }

    #[test]
    fn separation_is_flagged() {
        // group 1 never dies
        let o = obs(&[(1.0, true), (2.0, true), (3.0, false), (4.0, false), (5.0, true), (6.0, false)]);
        let groups = [0, 0, 1, 1, 0, 1];
        let fit = cox_fit(&groups, &o).unwrap();
        assert!(fit.separated);
        assert!(fit.log_lik.is_finite());
    }

    #[test]
    fn no_deaths_is_an_error() {
        let o = obs(&[(1.0, false)]);
        assert!(matches!(cox_fit(&[0], &o), Err(Error::NoDeaths)));
    }
}
