//! Ground-truth simulations: random true trees with parametric leaf
//! distributions, censored samples, and scores of trained trees against
//! the truth.

mod censor;
mod scores;
mod truth;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use censor::{add_noise, apply_censoring, calibrate_kappa, censor, CALIBRATION_DRAWS, NOISE_LEVELS};
pub use scores::{
    abc, area_between_curves, area_ratio, class_recovery, contingency, node_homogeneity, similarity,
    similarity_of_labels, AbcReport, ContingencyTable, SurvivalCurve,
};
pub use truth::{
    assign_distributions, generate_covariates, generate_truth_tree, sample_survival, sim_features,
    ParametricDistribution, SimCovariates, TruthModel, CANDIDATE_DISTRIBUTIONS, CATEGORICAL_LEVELS,
    MAX_TREE_ATTEMPTS,
};

use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::par::Execution;
use crate::search::{cross_validate_with, greedy_grow, train_with, Alpha, TrainParams, Trainer};
use crate::survival::{Dataset, Observation};
use crate::tree::{tree_error, SurvivalTree};

/// Training settings shared by every simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub min_bucket: usize,
    pub folds: usize,
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Optimal-tree depths from 1 up to the true depth plus this are
    /// cross-validated.
    pub ost_extra_depth: usize,
    /// Greedy depths from 1 up to the true depth plus this are
    /// cross-validated.
    pub greedy_extra_depth: usize,
    /// Penalties cross-validated for both trainers, as fractions of the
    /// null-tree training error.
    pub cp: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            min_bucket: 5,
            folds: 5,
            restarts: 10,
            max_sweeps: 100,
            ost_extra_depth: 1,
            greedy_extra_depth: 3,
            cp: vec![0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_total: usize,
    pub n_test: usize,
    pub n_train: usize,
    /// Depth range of the true tree, root at depth 1.
    pub min_depth: usize,
    pub max_depth: usize,
    /// Smallest true class when growing the true tree; defaults to 1% of
    /// `n_total`.
    pub min_bucket: Option<usize>,
    /// Target censored fraction.
    pub censoring: f64,
    /// Noise added to the training covariates.
    pub noise: Option<f64>,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_total: 3000,
            n_test: 1000,
            n_train: 1000,
            min_depth: 3,
            max_depth: 4,
            min_bucket: None,
            censoring: 0.35,
            noise: None,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_test >= self.n_total {
            return bad(format!("n_test ({}) must be below n_total ({})", self.n_test, self.n_total));
        }
        if self.n_train < 1 || self.n_train > self.n_total - self.n_test {
            return bad(format!(
                "n_train must lie in 1..={}, got {}",
                self.n_total - self.n_test,
                self.n_train
            ));
        }
        if self.min_depth < 1 || self.max_depth < self.min_depth {
            return bad(format!(
                "need 1 <= min_depth <= max_depth, got {} and {}",
                self.min_depth, self.max_depth
            ));
        }
        if !(0.0..0.95).contains(&self.censoring) {
            return bad(format!("censoring must lie in [0, 0.95), got {}", self.censoring));
        }
        if let Some(level) = self.noise {
            if !NOISE_LEVELS.contains(&level) {
                return Err(Error::UnsupportedNoiseLevel(level));
            }
        }
        if self.min_bucket == Some(0) {
            return bad("min_bucket must be at least 1".into());
        }
        if self.model.cp.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) || self.model.cp.is_empty() {
            return bad("cp must be a nonempty list of nonnegative numbers".into());
        }
        self.model_params(1).validate()
    }

    pub fn truth_min_bucket(&self) -> usize {
        self.min_bucket.unwrap_or((self.n_total / 100).max(1))
    }

    fn model_params(&self, max_depth: usize) -> TrainParams {
        TrainParams {
            max_depth,
            min_bucket: self.model.min_bucket,
            restarts: self.model.restarts,
            alpha: Alpha::Auto,
            seed: self.seed,
            max_sweeps: self.model.max_sweeps,
            folds: self.model.folds,
        }
    }
}

/// Scores of one trained tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub nh: f64,
    pub cr: f64,
    pub ar: f64,
    pub csr: f64,
    pub hc: f64,
    pub uc: f64,
    pub bpr: f64,
    pub ibr: f64,
    pub n_leaves: usize,
    pub depth: usize,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub ost: ModelScores,
    pub greedy: ModelScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub seed: u64,
    pub config: SimConfig,
    /// `None` when censoring is disabled.
    pub kappa: Option<f64>,
    /// Censored fraction over all generated rows.
    pub censoring_realized: f64,
    pub truth_leaves: usize,
    pub truth_depth: usize,
    pub models: ModelPair,
}

/// Everything generated for one seed before any model is trained.
#[derive(Debug, Clone)]
pub struct SimData {
    pub truth: TruthModel,
    pub kappa: f64,
    pub censoring_realized: f64,
    pub train: Dataset,
    pub test: Dataset,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Covariates, true model, survival and censoring times, and the
/// train/test split for `config`.
pub fn generate_data(config: &SimConfig) -> Result<SimData> {
    config.validate()?;
    let n = config.n_total;
    let cov = generate_covariates(n, &mut stream(config.seed, 0));
    let shape = generate_truth_tree(
        &cov.matrix,
        config.truth_min_bucket(),
        config.max_depth,
        config.min_depth,
        &mut stream(config.seed, 1),
    )?;
    let truth = assign_distributions(shape, &mut stream(config.seed, 2));
    let classes = truth.classes(&cov.matrix);

    let mut rng = stream(config.seed, 3);
    let survival: Vec<f64> = classes
        .iter()
        .map(|&l| truth.leaf_distributions[l].sample(&mut rng))
        .collect();
    let kappa = calibrate_kappa(&survival, config.censoring, 0.01, &mut stream(config.seed, 4))?;
    let mut rng = stream(config.seed, 5);
    let outcomes: Vec<Observation> = survival.iter().map(|&s| apply_censoring(s, kappa, &mut rng)).collect();
    let censoring_realized = outcomes.iter().filter(|o| !o.event).count() as f64 / n as f64;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(config.seed, 6));
    let test_rows = &order[..config.n_test];
    let train_rows = &order[config.n_test..config.n_test + config.n_train];

    let train_x = cov.select_rows(train_rows);
    let train_x = match config.noise {
        Some(level) => add_noise(&train_x, level, &mut stream(config.seed, 7))?,
        None => train_x,
    };
    let pick = |rows: &[usize]| rows.iter().map(|&i| outcomes[i]).collect::<Vec<_>>();
    let train = Dataset::new(train_x.matrix, pick(train_rows))?;
    let test = Dataset::new(cov.matrix.select_rows(test_rows), pick(test_rows))?;
    Ok(SimData {
        truth,
        kappa,
        censoring_realized,
        train,
        test,
    })
}

/// Scores `tree` against the truth on the test rows of `data`.
pub fn score_tree(tree: &SurvivalTree, data: &SimData) -> Result<ModelScores> {
    let table = contingency(tree, &data.truth, &data.test.covariates)?;
    let areas = area_between_curves(tree, &data.truth, &data.test)?;
    let report = evaluate(tree, &data.test, None)?;
    Ok(ModelScores {
        nh: node_homogeneity(&table),
        cr: class_recovery(&table),
        ar: areas.ratio,
        csr: report.csr,
        hc: report.harrell_c,
        uc: report.uno_c,
        bpr: report.bpr,
        ibr: report.ibr,
        n_leaves: tree.leaf_count(),
        depth: tree.depth(),
        alpha: tree.alpha(),
    })
}

/// Depth and penalty for `trainer` chosen by cross-validation over depths
/// from 1 to the true depth plus `extra_depth` and penalties
/// `cp * null_error`.
fn select_params(
    config: &SimConfig,
    data: &SimData,
    trainer: Trainer,
    extra_depth: usize,
    exec: Execution,
) -> Result<TrainParams> {
    let train = &data.train;
    let null = tree_error(&SurvivalTree::null(train, config.model.min_bucket)?, train)?;
    let alphas: Vec<f64> = config.model.cp.iter().map(|c| c * null).collect();
    let depths: Vec<usize> = (1..=data.truth.shape.depth() + extra_depth).collect();
    let folds = config.model.folds.min(train.len());
    Ok(cross_validate_with(train, &depths, &alphas, folds, &config.model_params(1), trainer, exec)?.params)
}

/// Optimal tree, cross-validated over depths up to the true depth plus
/// `ost_extra_depth`.
pub fn train_ost(config: &SimConfig, data: &SimData, exec: Execution) -> Result<SurvivalTree> {
    let params = select_params(config, data, Trainer::Optimal, config.model.ost_extra_depth, exec)?;
    Ok(train_with(&data.train, &params, exec)?.tree)
}

/// Greedy tree, cross-validated over depths up to the true depth plus
/// `greedy_extra_depth`.
pub fn train_greedy(config: &SimConfig, data: &SimData) -> Result<SurvivalTree> {
    let params = select_params(
        config,
        data,
        Trainer::Greedy,
        config.model.greedy_extra_depth,
        Execution::Sequential,
    )?;
    greedy_grow(&data.train, &params)
}

pub fn run_simulation(config: &SimConfig) -> Result<SimRecord> {
    run_simulation_with(config, Execution::default())
}

/// Generates one dataset, trains both trainers on it and scores them.
pub fn run_simulation_with(config: &SimConfig, exec: Execution) -> Result<SimRecord> {
    let data = generate_data(config)?;
    let ost = train_ost(config, &data, exec)?;
    let greedy = train_greedy(config, &data)?;
    Ok(SimRecord {
        seed: config.seed,
        config: config.clone(),
        kappa: data.kappa.is_finite().then_some(data.kappa),
        censoring_realized: data.censoring_realized,
        truth_leaves: data.truth.shape.leaves(),
        truth_depth: data.truth.shape.depth(),
        models: ModelPair {
            ost: score_tree(&ost, &data)?,
            greedy: score_tree(&greedy, &data)?,
        },
    })
}

/// Mean scores over the runs sharing a training size, censoring level and
/// trainer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n_train: usize,
    pub censoring: f64,
    pub model: &'static str,
    pub runs: usize,
    pub nh: f64,
    pub cr: f64,
    pub ar: f64,
    pub csr: f64,
    pub hc: f64,
    pub uc: f64,
    pub bpr: f64,
    pub ibr: f64,
    pub n_leaves: f64,
}

impl SummaryRow {
    pub const CSV_HEADER: &'static str = "n_train,censoring,model,runs,nh,cr,ar,csr,hc,uc,bpr,ibr,n_leaves";
}

pub fn summarize(records: &[SimRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, u64, &'static str), Vec<&ModelScores>> = BTreeMap::new();
    for r in records {
        for (name, scores) in [("greedy", &r.models.greedy), ("ost", &r.models.ost)] {
            groups
                .entry((r.config.n_train, r.config.censoring.to_bits(), name))
                .or_default()
                .push(scores);
        }
    }
    groups
        .into_iter()
        .map(|((n_train, censoring, model), runs)| {
            let mean = |f: fn(&ModelScores) -> f64| runs.iter().map(|s| f(s)).sum::<f64>() / runs.len() as f64;
            SummaryRow {
                n_train,
                censoring: f64::from_bits(censoring),
                model,
                runs: runs.len(),
                nh: mean(|s| s.nh),
                cr: mean(|s| s.cr),
                ar: mean(|s| s.ar),
                csr: mean(|s| s.csr),
                hc: mean(|s| s.hc),
                uc: mean(|s| s.uc),
                bpr: mean(|s| s.bpr),
                ibr: mean(|s| s.ibr),
                n_leaves: mean(|s| s.n_leaves as f64),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SummaryRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n_train, r.censoring, r.model, r.runs, r.nh, r.cr, r.ar, r.csr, r.hc, r.uc, r.bpr, r.ibr, r.n_leaves
        ));
    }
    out
}
