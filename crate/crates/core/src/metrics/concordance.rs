//! Harrell's and Uno's concordance statistics in O(n log n).
//!
//! A pair `(i, j)` is comparable when `t_i > t_j` and `j` died. It is
//! concordant when the earlier death carries the higher risk.

use crate::error::{Error, Result};
use crate::survival::{censoring_km, Observation};

/// Fenwick tree of counts over risk ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick(vec![0; n + 1])
    }

    fn add(&mut self, rank: usize) {
        let mut i = rank + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Count of inserted ranks `< rank`.
    fn below(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairCounts {
    pub concordant: f64,
    pub discordant: f64,
    pub tied: f64,
}

impl PairCounts {
    pub fn total(&self) -> f64 {
        self.concordant + self.discordant + self.tied
    }

    pub fn c_index(&self) -> Result<f64> {
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::NoComparablePairs);
        }
        Ok((self.concordant + 0.5 * self.tied) / total)
    }
}

/// Weighted pair counts; `weight(j)` multiplies every pair whose earlier
/// death is `j`, and `None` drops `j`.
fn weighted_counts(risk: &[f64], outcomes: &[Observation], weight: impl Fn(usize) -> Option<f64>) -> PairCounts {
    let n = risk.len();
    let mut levels: Vec<f64> = risk.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let rank: Vec<usize> = risk.iter().map(|r| levels.partition_point(|v| v < r)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| outcomes[b].time.total_cmp(&outcomes[a].time));
    let mut later = Fenwick::new(levels.len());
    let mut inserted = 0u64;
    let mut counts = PairCounts::default();
    let mut w = 0;
    while w < n {
        let t = outcomes[order[w]].time;
        let mut end = w;
        while end < n && outcomes[order[end]].time == t {
            end += 1;
        }
        for &j in &order[w..end] {
            if !outcomes[j].event {
                continue;
            }
            let Some(wt) = weight(j) else { continue };
            let below = later.below(rank[j]);
            let not_above = later.below(rank[j] + 1);
            counts.concordant += wt * below as f64;
            counts.tied += wt * (not_above - below) as f64;
            counts.discordant += wt * (inserted - not_above) as f64;
        }
        for &j in &order[w..end] {
            later.add(rank[j]);
            inserted += 1;
        }
        w = end;
    }
    counts
}

/// Concordant, discordant and tied comparable pairs.
pub fn pair_counts(risk: &[f64], outcomes: &[Observation]) -> PairCounts {
    weighted_counts(risk, outcomes, |_| Some(1.0))
}

/// `(CC + 0.5 TR) / (CC + DC + TR)`.
pub fn harrell_c(risk: &[f64], outcomes: &[Observation]) -> Result<f64> {
    check(risk, outcomes)?;
    pair_counts(risk, outcomes).c_index()
}

/// Uno's IPCW concordance truncated at `tau`: comparable pairs with
/// `t_j < tau` are weighted by `G(t_j)^-2`, with `G` the censoring
/// Kaplan-Meier curve of `outcomes`. Tied risks count one half.
pub fn uno_c(risk: &[f64], outcomes: &[Observation], tau: f64) -> Result<f64> {
    check(risk, outcomes)?;
    let g = censoring_km(outcomes)?;
    if outcomes.iter().any(|o| o.event && o.time < tau && g.eval(o.time) <= 0.0) {
        return Err(Error::CensoringWeightDegenerate { tau });
    }
    let counts = weighted_counts(risk, outcomes, |j| {
        let t = outcomes[j].time;
        (t < tau).then(|| g.eval(t).powi(-2))
    });
    counts.c_index()
}

fn check(risk: &[f64], outcomes: &[Observation]) -> Result<()> {
    if risk.len() != outcomes.len() {
        return Err(Error::InvalidParams("risk and outcome lengths differ".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(rows: &[(f64, bool)]) -> Vec<Observation> {
        rows.iter().map(|&(t, e)| Observation::new(t, e).unwrap()).collect()
    }

    fn naive(risk: &[f64], o: &[Observation]) -> (f64, f64, f64) {
        let (mut cc, mut dc, mut tr) = (0.0, 0.0, 0.0);
        for i in 0..o.len() {
            for j in 0..o.len() {
                if o[i].time > o[j].time && o[j].event {
                    if risk[i] < risk[j] {
                        cc += 1.0;
                    } else if risk[i] > risk[j] {
                        dc += 1.0;
                    } else {
                        tr += 1.0;
                    }
                }
            }
        }
        (cc, dc, tr)
    }

    #[test]
    fn four_observation_fixture() {
        let o = obs(&[(1.0, true), (2.0, false), (3.0, true), (4.0, false)]);
        let risk = [0.9, 0.5, 0.5, 0.1];
        let (cc, dc, tr) = naive(&risk, &o);
        let c = pair_counts(&risk, &o);
        assert_eq!((c.concordant, c.discordant, c.tied), (cc, dc, tr));
        assert_eq!(harrell_c(&risk, &o).unwrap(), (cc + 0.5 * tr) / (cc + dc + tr));
    }

    #[test]
    fn all_tied_is_half() {
        let o = obs(&[(1.0, true), (2.0, true), (3.0, false)]);
        assert_eq!(harrell_c(&[1.0; 3], &o).unwrap(), 0.5);
        assert_eq!(uno_c(&[1.0; 3], &o, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn inverse_risk_is_perfect() {
        let o = obs(&[(1.0, true), (2.0, true), (3.0, true), (4.0, true)]);
        assert_eq!(harrell_c(&[4.0, 3.0, 2.0, 1.0], &o).unwrap(), 1.0);
    }

    #[test]
    fn no_pairs_is_an_error() {
        let o = obs(&[(1.0, false), (2.0, false)]);
        assert!(matches!(harrell_c(&[1.0, 2.0], &o), Err(Error::NoComparablePairs)));
    }

    #[test]
    fn uno_matches_weighted_oracle() {
        let o = obs(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true), (5.0, true)]);
        let risk = [0.8, 0.3, 0.6, 0.6, 0.1];
        let tau = 4.5;
        let g = censoring_km(&o).unwrap();
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..5 {
            for j in 0..5 {
                if o[i].time > o[j].time && o[j].time < tau && o[j].event {
                    let w = g.eval(o[j].time).powi(-2);
                    den += w;
                    if risk[i] < risk[j] {
                        num += w;
                    } else if risk[i] == risk[j] {
                        num += 0.5 * w;
                    }
                }
            }
        }
        assert!((uno_c(&risk, &o, tau).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn uno_without_censoring_is_unweighted() {
        let o = obs(&[(1.0, true), (2.0, true), (3.0, true), (4.0, true), (6.0, true)]);
        let risk = [0.2, 0.9, 0.4, 0.4, 0.1];
        let tau = 3.5;
        let trunc: Vec<f64> = (0..5).map(|j| if o[j].time < tau { 1.0 } else { 0.0 }).collect();
        let c = weighted_counts(&risk, &o, |j| (trunc[j] > 0.0).then_some(1.0));
        assert_eq!(uno_c(&risk, &o, tau).unwrap(), c.c_index().unwrap());
    }
}
