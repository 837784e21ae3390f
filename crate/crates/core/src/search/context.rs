//! Per-dataset precomputation shared by every trainer, and the split sweep.
//!
//! A node's error only depends on three sums over its members: deaths `D`,
//! baseline mass `M` and `sat = sum(-ln baseline(t_i))` over deaths. With the
//! fitted coefficient `D / M` the error is `sat + D ln(M / D)`. `sat` is
//! additive over any partition, so candidate splits are ranked on the
//! `D ln(M / D)` parts alone.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::survival::{CovariateMatrix, Dataset, FeatureKind, StepFunction};
use crate::tree::{Shape, SplitRule};

/// Absolute tolerance for accepting an improvement.
pub(crate) const TOL: f64 = 1e-10;

/// Unordered categorical features with more present levels than this use the
/// coefficient-ordering shortcut instead of full subset enumeration.
pub(crate) const MAX_SUBSET_LEVELS: usize = 10;

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    pub count: u32,
    pub deaths: u32,
    pub mass: f64,
}

impl Acc {
    #[inline]
    fn add(&mut self, event: bool, hazard: f64) {
        self.count += 1;
        self.deaths += event as u32;
        self.mass += hazard;
    }

    #[inline]
    fn remove(&mut self, event: bool, hazard: f64) {
        self.count -= 1;
        self.deaths -= event as u32;
        self.mass -= hazard;
    }

    #[inline]
    fn merge(&mut self, other: &Acc) {
        self.count += other.count;
        self.deaths += other.deaths;
        self.mass += other.mass;
    }

    #[inline]
    pub fn ent(&self) -> f64 {
        if self.deaths == 0 {
            0.0
        } else {
            let d = self.deaths as f64;
            d * (self.mass.max(f64::MIN_POSITIVE) / d).ln()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Ordered,
    Unordered(usize),
}

pub(crate) struct Candidate {
    pub rule: SplitRule,
    /// Approximate error of the subtree after the split.
    pub error: f64,
}

pub(crate) struct Context<'a> {
    pub x: &'a CovariateMatrix,
    pub baseline: StepFunction,
    pub min_bucket: usize,
    hazard: Vec<f64>,
    event: Vec<bool>,
    sat: Vec<f64>,
    kinds: Vec<Kind>,
    rank: Vec<Vec<u32>>,
    distinct: Vec<Vec<f64>>,
}

impl<'a> Context<'a> {
    pub fn new(data: &'a Dataset, baseline: StepFunction, min_bucket: usize) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = data.len();
        let mut hazard = Vec::with_capacity(n);
        let mut sat = Vec::with_capacity(n);
        for o in &data.outcomes {
            let h = baseline.eval(o.time);
            if o.event && !(h > 0.0) {
                return Err(Error::BaselineMismatch { time: o.time });
            }
            hazard.push(h);
            sat.push(if o.event { -h.ln() } else { 0.0 });
        }
        let x = &data.covariates;
        let mut kinds = Vec::new();
        let mut rank = Vec::new();
        let mut distinct = Vec::new();
        for (f, feature) in x.features().iter().enumerate() {
            kinds.push(match &feature.kind {
                FeatureKind::Categorical { levels, ordered: false } => Kind::Unordered(levels.len()),
                _ => Kind::Ordered,
            });
            let col = x.column(f);
            let mut values: Vec<f64> = col.to_vec();
            values.sort_by(f64::total_cmp);
            values.dedup();
            rank.push(
                col.iter()
                    .map(|v| values.partition_point(|u| u < v) as u32)
                    .collect(),
            );
            distinct.push(values);
        }
        Ok(Context {
            x,
            baseline,
            min_bucket: min_bucket.max(1),
            hazard,
            event: data.outcomes.iter().map(|o| o.event).collect(),
            sat,
            kinds,
            rank,
            distinct,
        })
    }

    pub fn rows(&self) -> usize {
        self.hazard.len()
    }

    pub fn all_rows(&self) -> Vec<u32> {
        (0..self.rows() as u32).collect()
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    #[inline]
    pub fn outcome(&self, i: usize) -> (f64, bool) {
        (self.hazard[i], self.event[i])
    }

    #[inline]
    fn add(&self, acc: &mut Acc, i: u32) {
        acc.add(self.event[i as usize], self.hazard[i as usize]);
    }

    pub fn sat(&self, members: &[u32]) -> f64 {
        members.iter().map(|&i| self.sat[i as usize]).sum()
    }

    pub fn leaf_error(&self, members: &[u32]) -> f64 {
        let mut acc = Acc::default();
        for &i in members {
            self.add(&mut acc, i);
        }
        self.sat(members) + acc.ent()
    }

    /// Exact error of `shape` applied to `members`, or `None` if some leaf
    /// would fall below the minimum bucket size.
    pub fn shape_error(&self, shape: &Shape, members: &[u32]) -> Option<f64> {
        let k = shape.leaves();
        let mut accs = vec![Acc::default(); k];
        let mut sats = vec![0.0; k];
        for &i in members {
            let leaf = shape.leaf_index(self.x, i as usize);
            self.add(&mut accs[leaf], i);
            sats[leaf] += self.sat[i as usize];
        }
        if accs.iter().any(|a| (a.count as usize) < self.min_bucket) {
            return None;
        }
        Some(accs.iter().zip(&sats).map(|(a, s)| s + a.ent()).sum())
    }

    pub fn partition(&self, rule: &SplitRule, members: &[u32]) -> (Vec<u32>, Vec<u32>) {
        let f = rule.feature();
        members
            .iter()
            .partition(|&&i| rule.goes_left(self.x.value(i as usize, f)))
    }

    fn threshold(&self, feature: usize, lo: u32, hi: u32) -> f64 {
        let a = self.distinct[feature][lo as usize];
        if matches!(self.x.features()[feature].kind, FeatureKind::Categorical { .. }) {
            return a;
        }
        let b = self.distinct[feature][hi as usize];
        let mid = a + (b - a) / 2.0;
        if mid >= b {
            a
        } else {
            mid
        }
    }

    /// Best new rule for a node whose children keep the structures `left`
    /// and `right`. Every leaf of both children must keep at least
    /// `min_bucket` members.
    pub fn best_rule(&self, members: &[u32], left: &Shape, right: &Shape) -> Option<Candidate> {
        let (kl, kr) = (left.leaves(), right.leaves());
        if members.len() < (kl + kr) * self.min_bucket {
            return None;
        }
        let slots = Slots {
            left: slot_of(self, left, members),
            right: slot_of(self, right, members),
            kl,
            kr,
        };
        let sat = self.sat(members);
        let mut best: Option<(f64, SplitRule)> = None;
        let mut consider = |ent: f64, rule: SplitRule| {
            if best.as_ref().map_or(true, |(e, _)| ent < *e) {
                best = Some((ent, rule));
            }
        };
        let mut keyed: Vec<(u32, u32)> = Vec::with_capacity(members.len());
        for f in 0..self.n_features() {
            match self.kinds[f] {
                Kind::Ordered => {
                    keyed.clear();
                    keyed.extend(
                        members
                            .iter()
                            .enumerate()
                            .map(|(j, &i)| (self.rank[f][i as usize], j as u32)),
                    );
                    keyed.sort_unstable();
                    if let Some((lo, hi, ent)) = self.sweep(&keyed, members, &slots) {
                        let threshold = self.threshold(f, lo, hi);
                        consider(ent, SplitRule::Threshold { feature: f, threshold });
                    }
                }
                Kind::Unordered(levels) => {
                    if let Some((set, ent)) = self.best_subset(f, levels, members, &slots, &mut keyed) {
                        consider(ent, SplitRule::Subset { feature: f, levels: set });
                    }
                }
            }
        }
        best.map(|(ent, rule)| Candidate { rule, error: sat + ent })
    }

    /// Moves members from the right child to the left child in key order and
    /// returns the best feasible cut as `(last key left, first key right, ent)`.
    fn sweep(&self, keyed: &[(u32, u32)], members: &[u32], slots: &Slots) -> Option<(u32, u32, f64)> {
        let mb = self.min_bucket as u32;
        let mut l = vec![Acc::default(); slots.kl];
        let mut r = vec![Acc::default(); slots.kr];
        for (j, &i) in members.iter().enumerate() {
            self.add(&mut r[slots.right[j] as usize], i);
        }
        let mut ent: f64 = r.iter().map(Acc::ent).sum();
        let mut short = slots.kl + r.iter().filter(|a| a.count < mb).count();
        let mut best: Option<(u32, u32, f64)> = None;
        for w in 0..keyed.len().saturating_sub(1) {
            let (key, j) = keyed[w];
            let i = members[j as usize] as usize;
            let (e, h) = (self.event[i], self.hazard[i]);

            let rs = &mut r[slots.right[j as usize] as usize];
            let before = rs.ent();
            let was_short = rs.count < mb;
            rs.remove(e, h);
            ent += rs.ent() - before;
            short += (!was_short && rs.count < mb) as usize;

            let ls = &mut l[slots.left[j as usize] as usize];
            let before = ls.ent();
            let was_short = ls.count < mb;
            ls.add(e, h);
            ent += ls.ent() - before;
            short -= (was_short && ls.count >= mb) as usize;

            let next = keyed[w + 1].0;
            if next != key && short == 0 && best.map_or(true, |b| ent < b.2) {
                best = Some((key, next, ent));
            }
        }
        best
    }

    fn best_subset(
        &self,
        f: usize,
        levels: usize,
        members: &[u32],
        slots: &Slots,
        keyed: &mut Vec<(u32, u32)>,
    ) -> Option<(Vec<usize>, f64)> {
        let level_of = |i: u32| self.x.value(i as usize, f) as usize;
        let mut per_level = vec![Acc::default(); levels];
        for &i in members {
            self.add(&mut per_level[level_of(i)], i);
        }
        let present: Vec<usize> = (0..levels).filter(|&g| per_level[g].count > 0).collect();
        if present.len() < 2 {
            return None;
        }

        if present.len() > MAX_SUBSET_LEVELS {
            let mut order = present.clone();
            let theta = |g: usize| {
                let a = &per_level[g];
                if a.deaths == 0 {
                    0.0
                } else {
                    a.deaths as f64 / a.mass
                }
            };
            order.sort_by(|&a, &b| theta(a).total_cmp(&theta(b)).then(a.cmp(&b)));
            let mut position = vec![0u32; levels];
            for (p, &g) in order.iter().enumerate() {
                position[g] = p as u32;
            }
            keyed.clear();
            keyed.extend(
                members
                    .iter()
                    .enumerate()
                    .map(|(j, &i)| (position[level_of(i)], j as u32)),
            );
            keyed.sort_unstable();
            let (lo, _, ent) = self.sweep(keyed, members, slots)?;
            let mut set: Vec<usize> = order[..=lo as usize].to_vec();
            set.sort_unstable();
            return Some((set, ent));
        }

        let g = present.len();
        let mut index = vec![usize::MAX; levels];
        for (k, &lvl) in present.iter().enumerate() {
            index[lvl] = k;
        }
        let (kl, kr) = (slots.kl, slots.kr);
        let mut lv_l = vec![Acc::default(); g * kl];
        let mut lv_r = vec![Acc::default(); g * kr];
        for (j, &i) in members.iter().enumerate() {
            let k = index[level_of(i)];
            self.add(&mut lv_l[k * kl + slots.left[j] as usize], i);
            self.add(&mut lv_r[k * kr + slots.right[j] as usize], i);
        }
        let mb = self.min_bucket as u32;
        let mut best: Option<(u32, f64)> = None;
        let mut l = vec![Acc::default(); kl];
        let mut r = vec![Acc::default(); kr];
        let full = (1u32 << g) - 1;
        for mask in (1..full).filter(|m| m & 1 == 1) {
            l.iter_mut().for_each(|a| *a = Acc::default());
            r.iter_mut().for_each(|a| *a = Acc::default());
            for k in 0..g {
                if mask >> k & 1 == 1 {
                    for s in 0..kl {
                        l[s].merge(&lv_l[k * kl + s]);
                    }
                } else {
                    for s in 0..kr {
                        r[s].merge(&lv_r[k * kr + s]);
                    }
                }
            }
            if l.iter().chain(&r).any(|a| a.count < mb) {
                continue;
            }
            let ent: f64 = l.iter().chain(&r).map(Acc::ent).sum();
            if best.map_or(true, |b| ent < b.1) {
                best = Some((mask, ent));
            }
        }
        best.map(|(mask, ent)| {
            let set = (0..g).filter(|k| mask >> k & 1 == 1).map(|k| present[k]).collect();
            (set, ent)
        })
    }

    /// A uniformly random feasible split: features are tried in random order
    /// and the first one with a feasible cut supplies a uniformly random cut.
    pub fn random_rule<R: Rng + ?Sized>(&self, members: &[u32], rng: &mut R) -> Option<SplitRule> {
        let mb = self.min_bucket;
        if members.len() < 2 * mb {
            return None;
        }
        let mut features: Vec<usize> = (0..self.n_features()).collect();
        features.shuffle(rng);
        let mut keys: Vec<u32> = Vec::with_capacity(members.len());
        for f in features {
            keys.clear();
            match self.kinds[f] {
                Kind::Ordered => {
                    keys.extend(members.iter().map(|&i| self.rank[f][i as usize]));
                    keys.sort_unstable();
                    let cuts = feasible_cuts(&keys, mb);
                    if cuts.is_empty() {
                        continue;
                    }
                    let w = cuts[rng.random_range(0..cuts.len())];
                    let threshold = self.threshold(f, keys[w], keys[w + 1]);
                    return Some(SplitRule::Threshold { feature: f, threshold });
                }
                Kind::Unordered(levels) => {
                    let mut order: Vec<usize> = (0..levels).collect();
                    order.shuffle(rng);
                    let mut position = vec![0u32; levels];
                    for (p, &g) in order.iter().enumerate() {
                        position[g] = p as u32;
                    }
                    keys.extend(
                        members
                            .iter()
                            .map(|&i| position[self.x.value(i as usize, f) as usize]),
                    );
                    keys.sort_unstable();
                    let cuts = feasible_cuts(&keys, mb);
                    if cuts.is_empty() {
                        continue;
                    }
                    let w = cuts[rng.random_range(0..cuts.len())];
                    let mut set: Vec<usize> = order[..=keys[w] as usize]
                        .iter()
                        .copied()
                        .filter(|&g| keys.binary_search(&position[g]).is_ok())
                        .collect();
                    set.sort_unstable();
                    return Some(SplitRule::Subset { feature: f, levels: set });
                }
            }
        }
        None
    }
}

/// Positions `w` in sorted `keys` after which a cut leaves at least `mb`
/// entries on each side and falls between distinct keys.
fn feasible_cuts(keys: &[u32], mb: usize) -> Vec<usize> {
    let n = keys.len();
    (0..n.saturating_sub(1))
        .filter(|&w| w + 1 >= mb && n - w - 1 >= mb && keys[w] != keys[w + 1])
        .collect()
}

struct Slots {
    left: Vec<u16>,
    right: Vec<u16>,
    kl: usize,
    kr: usize,
}

fn slot_of(ctx: &Context, shape: &Shape, members: &[u32]) -> Vec<u16> {
    match shape {
        Shape::Leaf => vec![0; members.len()],
        _ => members
            .iter()
            .map(|&i| shape.leaf_index(ctx.x, i as usize) as u16)
            .collect(),
    }
}
