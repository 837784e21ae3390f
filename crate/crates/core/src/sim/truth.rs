//! Covariates, random ground-truth trees and the parametric leaf
//! distributions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Weibull};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::survival::{CovariateMatrix, Feature};
use crate::tree::{Shape, SplitRule};

/// Level counts of the discrete covariates.
pub const CATEGORICAL_LEVELS: [usize; 3] = [2, 3, 5];
pub const CONTINUOUS_COLUMNS: usize = 3;
pub const MAX_TREE_ATTEMPTS: usize = 1000;

/// Simulated covariates. Discrete columns are `floor(u * levels)` of a
/// uniform latent `u`, kept so noise can be applied before rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct SimCovariates {
    pub matrix: CovariateMatrix,
    pub latent: Vec<Vec<f64>>,
}

impl SimCovariates {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn select_rows(&self, rows: &[usize]) -> SimCovariates {
        SimCovariates {
            matrix: self.matrix.select_rows(rows),
            latent: self.latent.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }
}

pub fn sim_features() -> Vec<Feature> {
    let mut features: Vec<Feature> = (1..=CONTINUOUS_COLUMNS).map(|j| Feature::continuous(format!("x{j}"))).collect();
    for (k, &levels) in CATEGORICAL_LEVELS.iter().enumerate() {
        features.push(Feature::categorical(format!("x{}", CONTINUOUS_COLUMNS + k + 1), levels, true));
    }
    features
}

pub(crate) fn discretize(u: f64, levels: usize) -> f64 {
    ((u.clamp(0.0, 1.0) * levels as f64).floor() as usize).min(levels - 1) as f64
}

pub(crate) fn assemble(continuous: Vec<Vec<f64>>, latent: Vec<Vec<f64>>) -> SimCovariates {
    let mut columns = continuous;
    for (u, &levels) in latent.iter().zip(&CATEGORICAL_LEVELS) {
        columns.push(u.iter().map(|&v| discretize(v, levels)).collect());
    }
    let matrix = CovariateMatrix::new(sim_features(), columns).expect("simulated covariates are valid");
    SimCovariates { matrix, latent }
}

/// `n` rows: three U[0,1] columns, then discrete uniform columns with 2, 3
/// and 5 ordered levels.
pub fn generate_covariates<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SimCovariates {
    let mut draw = || (0..n).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let continuous: Vec<Vec<f64>> = (0..CONTINUOUS_COLUMNS).map(|_| draw()).collect();
    let latent: Vec<Vec<f64>> = CATEGORICAL_LEVELS.iter().map(|_| draw()).collect();
    assemble(continuous, latent)
}

struct GenNode {
    depth: usize,
    population: Vec<usize>,
    open: bool,
    split: Option<(SplitRule, usize, usize)>,
}

fn grow_once<R: Rng + ?Sized>(x: &CovariateMatrix, min_bucket: usize, max_depth: usize, rng: &mut R) -> Shape {
    let p = x.n_features();
    let mut nodes = vec![GenNode {
        depth: 1,
        population: (0..x.rows()).collect(),
        open: true,
        split: None,
    }];
    while let Some(current) = nodes.iter().position(|n| n.open) {
        let mut features: Vec<usize> = (0..=p).collect();
        features.shuffle(rng);
        for j in features {
            if j == p || nodes[current].depth == max_depth {
                break;
            }
            let mut values: Vec<f64> = nodes[current].population.iter().map(|&i| x.value(i, j)).collect();
            values.sort_by(f64::total_cmp);
            let mut unique = values.clone();
            unique.dedup();
            unique.shuffle(rng);
            let m = values.len();
            let Some(b) = unique.into_iter().find(|&b| {
                let left = values.partition_point(|&v| v <= b);
                left >= min_bucket && m - left >= min_bucket
            }) else {
                continue;
            };
            let (left, right): (Vec<usize>, Vec<usize>) =
                nodes[current].population.iter().partition(|&&i| x.value(i, j) <= b);
            let depth = nodes[current].depth + 1;
            let id = nodes.len();
            for population in [left, right] {
                nodes.push(GenNode {
                    depth,
                    population,
                    open: true,
                    split: None,
                });
            }
            nodes[current].split = Some((SplitRule::Threshold { feature: j, threshold: b }, id, id + 1));
            break;
        }
        nodes[current].open = false;
    }

    fn build(nodes: &[GenNode], k: usize) -> Shape {
        match &nodes[k].split {
            None => Shape::Leaf,
            Some((rule, l, r)) => Shape::split(rule.clone(), build(nodes, *l), build(nodes, *r)),
        }
    }
    build(&nodes, 0)
}

/// Random tree grown by repeatedly splitting the lowest-numbered open node
/// on the first feasible (feature, value) pair in random order, where a
/// virtual extra feature closes the node. Trees shallower than `min_depth`
/// are redrawn.
pub fn generate_truth_tree<R: Rng + ?Sized>(
    x: &CovariateMatrix,
    min_bucket: usize,
    max_depth: usize,
    min_depth: usize,
    rng: &mut R,
) -> Result<Shape> {
    if min_bucket < 1 || min_depth < 1 || max_depth < min_depth {
        return Err(Error::InvalidParams(format!(
            "need min_bucket >= 1 and max_depth >= min_depth >= 1, got {min_bucket}, {max_depth}, {min_depth}"
        )));
    }
    for _ in 0..MAX_TREE_ATTEMPTS {
        let shape = grow_once(x, min_bucket, max_depth, rng);
        if shape.depth() >= min_depth {
            return Ok(shape);
        }
    }
    Err(Error::InfeasibleTruthTree {
        attempts: MAX_TREE_ATTEMPTS,
    })
}

/// Survival distribution of one true class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ParametricDistribution {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma2: f64 },
    Gamma { shape: f64, scale: f64 },
}

use ParametricDistribution::{Exponential as Ex, Gamma as Ga, Lognormal as Ln, Weibull as Wb};

/// The 32 candidate leaf distributions, eight per family.
pub const CANDIDATE_DISTRIBUTIONS: [ParametricDistribution; 32] = [
    Ex { rate: 0.3 },
    Ex { rate: 0.4 },
    Ex { rate: 0.6 },
    Ex { rate: 0.8 },
    Ex { rate: 0.9 },
    Ex { rate: 1.15 },
    Ex { rate: 1.5 },
    Ex { rate: 1.8 },
    Wb { shape: 0.8, scale: 0.4 },
    Wb { shape: 0.9, scale: 0.5 },
    Wb { shape: 0.9, scale: 0.7 },
    Wb { shape: 0.9, scale: 1.1 },
    Wb { shape: 0.9, scale: 1.5 },
    Wb { shape: 1.0, scale: 1.1 },
    Wb { shape: 1.0, scale: 1.9 },
    Wb { shape: 1.3, scale: 0.5 },
    Ln { mu: 0.1, sigma2: 1.0 },
    Ln { mu: 0.2, sigma2: 0.75 },
    Ln { mu: 0.3, sigma2: 0.3 },
    Ln { mu: 0.3, sigma2: 0.5 },
    Ln { mu: 0.3, sigma2: 0.8 },
    Ln { mu: 0.4, sigma2: 0.32 },
    Ln { mu: 0.5, sigma2: 0.3 },
    Ln { mu: 0.5, sigma2: 0.7 },
    Ga { shape: 0.2, scale: 0.75 },
    Ga { shape: 0.3, scale: 1.3 },
    Ga { shape: 0.3, scale: 2.0 },
    Ga { shape: 0.5, scale: 1.5 },
    Ga { shape: 0.8, scale: 1.0 },
    Ga { shape: 0.9, scale: 1.3 },
    Ga { shape: 1.4, scale: 0.9 },
    Ga { shape: 1.5, scale: 0.7 },
];

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl ParametricDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Ex { rate } => rate > 0.0 && rate.is_finite(),
            Wb { shape, scale } | Ga { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
            Ln { mu, sigma2 } => mu.is_finite() && sigma2 > 0.0 && sigma2.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t == f64::INFINITY {
            return 0.0;
        }
        match *self {
            Ex { rate } => (-rate * t).exp(),
            Wb { shape, scale } => (-(t / scale).powf(shape)).exp(),
            Ln { mu, sigma2 } => 0.5 * erfc((t.ln() - mu) / (2.0 * sigma2).sqrt()),
            Ga { shape, scale } => gamma_ur(shape, t / scale),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// `int_0^t S(u) du` in closed form.
    pub fn survival_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match *self {
            Ex { rate } => -(-rate * t).exp_m1() / rate,
            Wb { shape, scale } => {
                let a = 1.0 / shape;
                scale * a * gamma(a) * gamma_lr(a, (t / scale).powf(shape))
            }
            Ln { mu, sigma2 } => {
                let sigma = sigma2.sqrt();
                t * self.survival(t) + (mu + 0.5 * sigma2).exp() * std_normal_cdf((t.ln() - mu - sigma2) / sigma)
            }
            Ga { shape, scale } => {
                let x = t / scale;
                t * gamma_ur(shape, x) + shape * scale * gamma_lr(shape + 1.0, x)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s: f64 = match *self {
            Ex { rate } => Exp::new(rate).unwrap().sample(rng),
            Wb { shape, scale } => Weibull::new(scale, shape).unwrap().sample(rng),
            Ln { mu, sigma2 } => LogNormal::new(mu, sigma2.sqrt()).unwrap().sample(rng),
            Ga { shape, scale } => Gamma::new(shape, scale).unwrap().sample(rng),
        };
        s.max(f64::MIN_POSITIVE)
    }
}

/// One draw from `dist`.
pub fn sample_survival<R: Rng + ?Sized>(dist: &ParametricDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}

/// Ground-truth model: a tree structure whose leaves, numbered in
/// pre-order, each carry a distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthModel {
    pub shape: Shape,
    pub leaf_distributions: Vec<ParametricDistribution>,
}

impl TruthModel {
    pub fn new(shape: Shape, leaf_distributions: Vec<ParametricDistribution>) -> Result<Self> {
        if leaf_distributions.len() != shape.leaves() {
            return Err(Error::InvalidParams(format!(
                "{} distributions for {} leaves",
                leaf_distributions.len(),
                shape.leaves()
            )));
        }
        for d in &leaf_distributions {
            d.validate()?;
        }
        Ok(TruthModel {
            shape,
            leaf_distributions,
        })
    }

    pub fn class_of(&self, x: &CovariateMatrix, row: usize) -> usize {
        self.shape.leaf_index(x, row)
    }

    pub fn classes(&self, x: &CovariateMatrix) -> Vec<usize> {
        (0..x.rows()).map(|i| self.class_of(x, i)).collect()
    }
}

/// Independent uniform draw from the candidate list for every leaf.
pub fn assign_distributions<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> TruthModel {
    let dists = (0..shape.leaves())
        .map(|_| CANDIDATE_DISTRIBUTIONS[rng.random_range(0..CANDIDATE_DISTRIBUTIONS.len())])
        .collect();
    TruthModel {
        shape,
        leaf_distributions: dists,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn covariate_marginals() {
        let one = generate_covariates(1, &mut rng(1));
        assert_eq!(one.matrix.n_features(), 6);
        assert!((0..3).all(|j| (0.0..=1.0).contains(&one.matrix.value(0, j))));

        let cov = generate_covariates(10_000, &mut rng(2));
        let mean = cov.matrix.column(0).iter().sum::<f64>() / 10_000.0;
        assert!((0.48..=0.52).contains(&mean), "{mean}");
        let ones = cov.matrix.column(3).iter().filter(|&&v| v == 1.0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&ones), "{ones}");
        for (k, &levels) in CATEGORICAL_LEVELS.iter().enumerate() {
            assert!(cov.matrix.column(3 + k).iter().all(|&v| v < levels as f64 && v.fract() == 0.0));
        }
    }

    fn audit(shape: &Shape, x: &CovariateMatrix, rows: &[usize], min_bucket: usize) {
        assert!(rows.len() >= min_bucket);
        if let Shape::Split { rule, left, right } = shape {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| rule.goes_left(x.value(i, rule.feature())));
            audit(left, x, &l, min_bucket);
            audit(right, x, &r, min_bucket);
        }
    }

    #[test]
    fn truth_trees_respect_limits() {
        let cov = generate_covariates(2000, &mut rng(3));
        let all: Vec<usize> = (0..2000).collect();
        let mut r = rng(4);
        for _ in 0..200 {
            let shape = generate_truth_tree(&cov.matrix, 20, 4, 3, &mut r).unwrap();
            assert!((3..=4).contains(&shape.depth()));
            audit(&shape, &cov.matrix, &all, 20);
        }
    }

    #[test]
    fn depth_one_is_a_leaf() {
        let cov = generate_covariates(50, &mut rng(5));
        let shape = generate_truth_tree(&cov.matrix, 1, 1, 1, &mut rng(6)).unwrap();
        assert_eq!(shape, Shape::Leaf);
    }

    #[test]
    fn infeasible_buckets_exhaust_attempts() {
        let cov = generate_covariates(10, &mut rng(7));
        assert!(matches!(
            generate_truth_tree(&cov.matrix, 6, 3, 2, &mut rng(8)),
            Err(Error::InfeasibleTruthTree { attempts: MAX_TREE_ATTEMPTS })
        ));
    }

    #[test]
    fn assignment_is_uniform_over_candidates() {
        let mut counts = [0usize; 32];
        let mut r = rng(9);
        let tree = assign_distributions(Shape::Leaf, &mut r);
        assert_eq!(tree.leaf_distributions.len(), 1);
        for _ in 0..10_000 {
            let d = assign_distributions(Shape::Leaf, &mut r).leaf_distributions[0];
            counts[CANDIDATE_DISTRIBUTIONS.iter().position(|c| *c == d).unwrap()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.024..=0.039).contains(&f), "{f}");
        }
        let a = assign_distributions(Shape::Leaf, &mut rng(10));
        let b = assign_distributions(Shape::Leaf, &mut rng(10));
        assert_eq!(a, b);
    }

    #[test]
    fn candidates_are_valid_survival_curves() {
        for d in CANDIDATE_DISTRIBUTIONS {
            d.validate().unwrap();
            assert_eq!(d.survival(0.0), 1.0);
            let mut prev = 1.0;
            for k in 1..200 {
                let s = d.survival(k as f64 * 0.05);
                assert!(s <= prev + 1e-15 && s >= 0.0);
                prev = s;
            }
        }
    }

    /// Trapezoid rule on a fine grid against each closed-form integral.
    #[test]
    fn integrals_match_quadrature() {
        for d in CANDIDATE_DISTRIBUTIONS {
            for t in [0.3f64, 1.0, 4.0] {
                // substitute u = v^4 to tame the t^(k-1) singularity at zero
                let m = 200_000;
                let top = t.powf(0.25);
                let h = top / m as f64;
                let f = |v: f64| d.survival(v.powi(4)) * 4.0 * v.powi(3);
                let mut sum = 0.5 * (f(0.0) + f(top));
                for k in 1..m {
                    sum += f(k as f64 * h);
                }
                let quad = sum * h;
                let exact = d.survival_integral(t);
                assert!((quad - exact).abs() < 1e-7, "{d:?} t={t}: {quad} vs {exact}");
            }
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let d = Ex { rate: 1.0 };
        let mut r = rng(11);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_survival(&d, &mut r)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn lognormal_sample_median() {
        let d = Ln { mu: 0.3, sigma2: 0.3 };
        let mut r = rng(12);
        let n = 100_000;
        let mut s: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
        s.sort_by(f64::total_cmp);
        let median = s[n / 2];
        let m = 0.3f64.exp();
        // asymptotic sd of the sample median: 1 / (2 f(m) sqrt(n))
        let density = 1.0 / (m * (2.0 * std::f64::consts::PI * 0.3).sqrt());
        let se = 1.0 / (2.0 * density * (n as f64).sqrt());
        assert!((median - m).abs() < 3.0 * se, "{median} vs {m}");
    }

    #[test]
    fn unit_shape_weibull_is_exponential() {
        let d = Wb { shape: 1.0, scale: 1.9 };
        let mut r = rng(13);
        let n = 10_000;
        let mut s: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
        s.sort_by(f64::total_cmp);
        let exp = Ex { rate: 1.0 / 1.9 };
        let ks = s
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = exp.cdf(v);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov critical value at the 1% level
        assert!(ks < 1.628 / (n as f64).sqrt(), "{ks}");
        for t in [0.1, 1.0, 5.0] {
            assert!((d.survival(t) - exp.survival(t)).abs() < 1e-15);
        }
    }
}
