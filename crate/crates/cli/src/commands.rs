use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use survtree::io::{load_dataset, ColumnSpec, IngestConfig};
use survtree::metrics::{evaluate as evaluate_tree, MetricReport};
use survtree::par::{map_indexed, Execution};
use survtree::search::{greedy_grow, train as train_optimal, Alpha, TrainParams};
use survtree::sim::{run_simulation_with, summarize, summary_csv, SimConfig};
use survtree::tree::objective;
use survtree::{Dataset, Error, FeatureKind, SurvivalTree};

use crate::{
    BenchmarkArgs, DataArgs, EvaluateArgs, ExportDotArgs, ParamArgs, PredictArgs, SimulateArgs, TrainArgs,
    TrainerKind,
};

#[derive(Debug, Clone, Copy)]
pub enum Code {
    Usage = 2,
    Data = 3,
    Internal = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: Code,
    pub message: String,
}

impl CliError {
    fn usage(message: impl ToString) -> Self {
        CliError {
            code: Code::Usage,
            message: message.to_string(),
        }
    }

    fn data(message: impl ToString) -> Self {
        CliError {
            code: Code::Data,
            message: message.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_)
            | Error::InvalidComplexity(_)
            | Error::Schema(_)
            | Error::Parse { .. }
            | Error::UnsupportedNoiseLevel(_)
            | Error::InfeasibleTruthTree { .. } => Code::Usage,
            Error::DegenerateLeaf { .. } | Error::BaselineMismatch { .. } => Code::Internal,
            _ => Code::Data,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path, what: &str, code: Code) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError {
        code,
        message: if e.kind() == io::ErrorKind::NotFound {
            format!("{what} not found: {}", path.display())
        } else {
            format!("cannot read {what} {}: {e}", path.display())
        },
    })
}

fn write(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", p.display()))),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::data(format!("cannot write output: {e}"))),
    }
}

fn ingest_config(schema: Option<&Path>, model: Option<&SurvivalTree>) -> CliResult<IngestConfig> {
    if let Some(path) = schema {
        let text = read(path, "schema", Code::Usage)?;
        return Ok(IngestConfig::from_schema_json(text.as_bytes())?);
    }
    let mut config = IngestConfig::default();
    if let Some(tree) = model {
        for f in tree.features() {
            if let FeatureKind::Categorical { levels, ordered } = &f.kind {
                config.columns.insert(
                    f.name.clone(),
                    ColumnSpec::Categorical {
                        levels: levels.clone(),
                        ordered: *ordered,
                    },
                );
            }
        }
    }
    Ok(config)
}

fn load(args: &DataArgs, model: Option<&SurvivalTree>) -> CliResult<Dataset> {
    let config = ingest_config(args.schema.as_deref(), model)?;
    let text = read(&args.data, "data", Code::Data)?;
    Ok(load_dataset(text.as_bytes(), &config)?)
}

fn load_model(path: &Path) -> CliResult<SurvivalTree> {
    let text = read(path, "model", Code::Data)?;
    SurvivalTree::from_json(&text).map_err(|e| CliError::data(format!("malformed model: {e}")))
}

/// Defaults, then flags, then the fields of `--config`. A seed must come
/// from one of the last two.
fn train_params(args: &ParamArgs) -> CliResult<TrainParams> {
    let mut p = TrainParams::default();
    if let Some(a) = &args.alpha {
        p.alpha = Alpha::from_str(a).map_err(CliError::usage)?;
    }
    p.max_depth = args.max_depth.unwrap_or(p.max_depth);
    p.min_bucket = args.min_bucket.unwrap_or(p.min_bucket);
    p.restarts = args.restarts.unwrap_or(p.restarts);
    p.folds = args.folds.unwrap_or(p.folds);
    p.seed = args.seed.unwrap_or(p.seed);
    let mut seeded = args.seed.is_some();
    if let Some(path) = &args.config {
        let overrides = read_config(path)?;
        seeded |= overrides.contains_key("seed");
        let mut merged = serde_json::to_value(&p).expect("params serialize");
        merged.as_object_mut().unwrap().extend(overrides);
        p = serde_json::from_value(merged).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
    }
    if !seeded {
        return Err(CliError::usage("a seed is required: pass --seed or set \"seed\" in --config"));
    }
    p.validate()?;
    Ok(p)
}

fn read_config(path: &Path) -> CliResult<serde_json::Map<String, Value>> {
    let text = read(path, "config", Code::Usage)?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CliError::usage("invalid config: expected a JSON object")),
        Err(e) => Err(CliError::usage(format!("invalid config: {e}"))),
    }
}

fn fit(data: &Dataset, params: &TrainParams, trainer: TrainerKind) -> CliResult<(SurvivalTree, f64)> {
    match trainer {
        TrainerKind::Optimal => {
            let out = train_optimal(data, params)?;
            Ok((out.tree, out.objective))
        }
        TrainerKind::Greedy => {
            let tree = greedy_grow(data, params)?;
            let obj = objective(&tree, data, tree.alpha())?;
            Ok((tree, obj))
        }
    }
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let params = train_params(&args.params)?;
    let data = load(&args.data, None)?;
    let (tree, obj) = fit(&data, &params, args.trainer)?;
    write(Some(&args.out), &tree.to_json())?;
    let summary = json!({
        "trainer": match args.trainer {
            TrainerKind::Optimal => "optimal",
            TrainerKind::Greedy => "greedy",
        },
        "objective": obj,
        "n_leaves": tree.leaf_count(),
        "depth": tree.depth(),
        "alpha": tree.alpha(),
        "max_depth": params.max_depth,
        "seed": params.seed,
    });
    println!("{summary}");
    Ok(())
}

pub fn predict(args: PredictArgs) -> CliResult<()> {
    let tree = load_model(&args.model)?;
    let data = load(&args.data, Some(&tree))?;
    tree.check_schema(&data.covariates)?;
    let leaves = tree.assign_leaves(&data.covariates)?;
    let mut out = String::from("row,leaf,theta");
    for t in &args.at {
        write!(out, ",S({t})").unwrap();
    }
    out.push('\n');
    for (row, leaf) in leaves.into_iter().enumerate() {
        let fit = tree.leaf_fit(leaf).expect("assigned to a leaf");
        write!(out, "{},{},{}", row + 1, leaf, fit.theta).unwrap();
        for &t in &args.at {
            write!(out, ",{}", fit.curve.eval(t)).unwrap();
        }
        out.push('\n');
    }
    write(args.out.as_deref(), &out)
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let tree = load_model(&args.model)?;
    let data = load(&args.data, Some(&tree))?;
    tree.check_schema(&data.covariates)?;
    let report = evaluate_tree(&tree, &data, args.tau)?;
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if let Some(path) = &args.out {
        write(Some(path), &report.to_csv())?;
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let (base, seeded_by_config) = match &args.config {
        Some(path) => {
            let map = read_config(path)?;
            let seeded = map.contains_key("seed");
            let config: SimConfig =
                serde_json::from_value(Value::Object(map)).map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
            (config, seeded)
        }
        None => (SimConfig::default(), false),
    };
    let first = match (args.seed, seeded_by_config) {
        (Some(s), _) => s,
        (None, true) => base.seed,
        (None, false) => {
            return Err(CliError::usage("a seed is required: pass --seed or set \"seed\" in --config"));
        }
    };
    if args.repetitions == 0 {
        return Err(CliError::usage("repetitions must be at least 1"));
    }
    base.validate()?;

    // repetitions run in parallel, each one sequentially inside
    let started = Instant::now();
    let results = map_indexed(args.repetitions as usize, Execution::Parallel, |k| {
        let config = SimConfig {
            seed: first + k as u64,
            ..base.clone()
        };
        run_simulation_with(&config, Execution::Sequential)
    });
    let records = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    log::info!("{} runs in {:.1}s", records.len(), started.elapsed().as_secs_f64());

    fs::create_dir_all(&args.out).map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write(Some(&args.out.join("records.jsonl")), &lines)?;
    write(Some(&args.out.join("summary.csv")), &summary_csv(&summarize(&records)))?;
    println!("{}", json!({ "records": records.len(), "first_seed": first }));
    Ok(())
}

pub fn benchmark(args: BenchmarkArgs) -> CliResult<()> {
    let params = train_params(&args.params)?;
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(CliError::usage("test fraction must lie strictly between 0 and 1"));
    }
    let data = load(&args.data, None)?;
    let n = data.len();
    let n_test = ((n as f64 * args.test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let (test_rows, train_rows) = order.split_at(n_test);
    let (train, test) = (data.subset(train_rows), data.subset(test_rows));

    let mut out = format!("model,n_leaves,depth,alpha,objective,{}\n", MetricReport::CSV_HEADER);
    for (name, trainer) in [("optimal", TrainerKind::Optimal), ("greedy", TrainerKind::Greedy)] {
        let started = Instant::now();
        let (tree, obj) = fit(&train, &params, trainer)?;
        log::info!("{name}: trained in {:.2}s", started.elapsed().as_secs_f64());
        let r = evaluate_tree(&tree, &test, args.tau)?;
        writeln!(
            out,
            "{name},{},{},{},{obj},{},{},{},{},{},{},{},{},{},{}",
            tree.leaf_count(),
            tree.depth(),
            tree.alpha(),
            r.cox_score,
            r.csr,
            r.harrell_c,
            r.uno_c,
            r.bp,
            r.bpr,
            r.ib,
            r.ibr,
            r.tau,
            r.t_max
        )
        .unwrap();
    }
    write(args.out.as_deref(), &out)
}

pub fn export_dot(args: ExportDotArgs) -> CliResult<()> {
    let tree = load_model(&args.model)?;
    write(args.out.as_deref(), &tree.to_dot())
}
