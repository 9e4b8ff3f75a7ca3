use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use matryoshka_core::adaboost::{mc_misclassification, train_adaboost, BoostConfig, Strategy, ENUMERATION_CAP};
use matryoshka_core::figures::{self, Figure, FIGURE_RHOS, NESTING_RHO};
use matryoshka_core::matryoshka::{
    build_fixed_2_matryoshka, build_greedy_matryoshka, CompositeScoring, MatryoshkaConfig, RateBasis,
};
use matryoshka_core::model::{write_csv_rows, Metadata, Model, ModelRecord};
use matryoshka_core::ptree::{grow_tree, mc_tree_misclassification, StopRule, TreeConfig};
use matryoshka_core::weak::{
    ConstantEdgeLearner, Estimator, QSource, SamplingConfig, StumpLearner, SystemStopwatch, WeakLearner,
};
use matryoshka_core::{Dataset, RandomStream, Sign};

/// Probabilistic boosting: training, evaluation and bound tables.
#[derive(Debug, Parser)]
#[command(name = "matryoshka", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one of the bound figures as CSV.
    Figure(FigureArgs),
    /// Train a model and write it with its training log.
    Train(TrainArgs),
    /// Report losses and bounds of a saved model.
    Eval(EvalArgs),
    /// Compare the simple and matryoshka decrease rates along F(T, rho).
    Rates(RatesArgs),
}

#[derive(Debug, Args)]
struct FigureArgs {
    /// adaboost-vs-tree-vs-m2, tree-of-trees or nesting-levels (or a, b, c).
    name: String,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Geometric sweep points for tree-of-trees.
    #[arg(long, default_value_t = 65)]
    points: usize,
}

#[derive(Debug, Args)]
struct RatesArgs {
    #[arg(long = "T", default_value_t = 16)]
    t: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Algo {
    Adaboost,
    Ptree,
    Matryoshka,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Oracle {
    Stump,
    ConstantEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Fixed2,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum EstimatorArg {
    Map,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
enum StrategyArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum BasisArg {
    PerNode,
    PerSecond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ScoringArg {
    Inherited,
    Refit,
}

/// Training settings; every field may also come from `--config`.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainArgs {
    /// TOML file with any of the options below; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// CSV with columns f0..f{d-1},label[,weight]; a synthetic set when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    #[arg(long, value_enum)]
    oracle: Option<Oracle>,
    /// Edge of the constant-edge oracle.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Flip probability of the noisy stump.
    #[arg(long)]
    p_flip: Option<f64>,
    /// Rounds, nodes, or the raw weak-learner budget of a greedy matryoshka.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    t: Option<usize>,
    /// Levels of a fixed-2 matryoshka.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: Option<u32>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    scoring: Option<ScoringArg>,
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Use the oracle's true q instead of sampling.
    #[arg(long)]
    #[serde(default)]
    exact_q: bool,
    #[arg(long)]
    r_max: Option<u64>,
    #[arg(long, env = "MATRYOSHKA_SEED")]
    seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV; defaults to the model path with a .csv extension.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Monte-Carlo trials for the reported training error.
    #[arg(long)]
    trials: Option<usize>,
    /// Size of the synthetic dataset.
    #[arg(long)]
    samples: Option<usize>,
}

impl TrainArgs {
    fn merged(self) -> Result<TrainArgs> {
        let Some(path) = &self.config else { return Ok(self) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: TrainArgs = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(TrainArgs {
            config: None,
            data: self.data.or(file.data),
            algo: self.algo.or(file.algo),
            oracle: self.oracle.or(file.oracle),
            epsilon: self.epsilon.or(file.epsilon),
            p_flip: self.p_flip.or(file.p_flip),
            t: self.t.or(file.t),
            l: self.l.or(file.l),
            mode: self.mode.or(file.mode),
            scoring: self.scoring.or(file.scoring),
            basis: self.basis.or(file.basis),
            estimator: self.estimator.or(file.estimator),
            strategy: self.strategy.or(file.strategy),
            exact_q: self.exact_q || file.exact_q,
            r_max: self.r_max.or(file.r_max),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            log: self.log.or(file.log),
            trials: self.trials.or(file.trials),
            samples: self.samples.or(file.samples),
        })
    }
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV; the recorded synthetic set when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, env = "MATRYOSHKA_SEED", default_value_t = 0)]
    seed: u64,
}

const DEFAULT_SAMPLES: usize = 200;

/// Two uniform features; the label is the side of a slanted line, flipped with probability 0.1.
fn synthetic(seed: u64, n: usize) -> Result<Dataset> {
    ensure!(n > 0, "the synthetic dataset needs at least one sample");
    let mut s = RandomStream::new(seed, "cli/synthetic", 0);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = vec![s.uniform(), s.uniform()];
        let side = if x[0] + 0.5 * x[1] > 0.75 { Sign::Plus } else { Sign::Minus };
        labels.push(if s.bernoulli(0.1) { side.flip() } else { side });
        features.push(x);
    }
    Ok(Dataset::new(features, labels, None)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn emit<T: serde::Serialize>(out: Option<&Path>, rows: &[T]) -> Result<()> {
    match out {
        Some(path) => write_csv_rows(create(path)?, rows)?,
        None => write_csv_rows(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn cmd_figure(args: FigureArgs) -> Result<()> {
    let figure: Figure = args.name.parse()?;
    let out = args.out.as_deref();
    match figure {
        Figure::AdaboostVsTreeVsM2 => emit(out, &figures::adaboost_vs_tree_vs_m2(&FIGURE_RHOS, 1024)?),
        Figure::TreeOfTrees => emit(out, &figures::tree_of_trees(&[64, 256, 1024], NESTING_RHO, args.points)?),
        Figure::NestingLevels => emit(out, &figures::nesting_levels(&[1024, 65536], NESTING_RHO)?),
    }
}

fn cmd_rates(args: RatesArgs) -> Result<()> {
    ensure!(args.t >= 1, "--T must be at least 1");
    emit(args.out.as_deref(), &figures::rates_report(&FIGURE_RHOS, args.t)?)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let args = args.merged()?;
    let seed = args.seed.unwrap_or(0);
    let algo = args.algo.unwrap_or(Algo::Adaboost);
    let oracle = args.oracle.unwrap_or(Oracle::Stump);
    let samples = args.samples.unwrap_or(DEFAULT_SAMPLES);

    let mut params = std::collections::BTreeMap::new();
    let data = match &args.data {
        Some(path) => {
            params.insert("data".to_string(), path.display().to_string());
            Dataset::load_csv(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => {
            params.insert("data".to_string(), format!("synthetic:{samples}"));
            synthetic(seed, samples)?
        }
    };
    params.insert("dim".to_string(), data.dim().to_string());

    let learner: Box<dyn WeakLearner> = match oracle {
        Oracle::Stump => Box::new(StumpLearner::new(args.p_flip.unwrap_or(0.1))?),
        Oracle::ConstantEdge => Box::new(ConstantEdgeLearner::new(args.epsilon.unwrap_or(0.1))?),
    };
    let q_source = if args.exact_q {
        QSource::Exact
    } else {
        let estimator = match args.estimator.unwrap_or(EstimatorArg::Map) {
            EstimatorArg::Map => Estimator::Map,
            EstimatorArg::Ml => Estimator::Ml,
        };
        let config = SamplingConfig { estimator, r_max: args.r_max.unwrap_or(10_000), ..Default::default() };
        config.validate()?;
        QSource::Sampled(config)
    };
    let strategy = match args.strategy.unwrap_or(StrategyArg::A) {
        StrategyArg::A => Strategy::A,
        StrategyArg::B => Strategy::B,
    };
    ensure!(strategy == Strategy::A || algo == Algo::Adaboost, "--strategy B applies to adaboost only");
    params.insert("algo".to_string(), format!("{algo:?}").to_lowercase());
    params.insert("q".to_string(), if args.exact_q { "exact".into() } else { "sampled".into() });

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
    let log_path = args.log.clone().unwrap_or_else(|| out.with_extension("csv"));
    let trials = args.trials.unwrap_or(1000);
    ensure!(trials > 0, "--trials must be positive");
    let t = args.t;

    let (model, calls, loss) = match algo {
        Algo::Adaboost => {
            let rounds = t.unwrap_or(10);
            ensure!(rounds >= 1, "--T must be at least 1");
            let config = BoostConfig { rounds, q_source, strategy, seed };
            let model = train_adaboost(&data, learner.as_ref(), &config)?;
            write_csv_rows(create(&log_path)?, &model.log())?;
            let loss = mc_misclassification(&model, &data, trials, seed)?;
            let calls = model.len();
            (Model::Adaboost(model), calls, loss)
        }
        Algo::Ptree => {
            let nodes = t.unwrap_or(10);
            ensure!(nodes >= 1, "--T must be at least 1");
            let config = TreeConfig { stop: StopRule::nodes(nodes), q_source, seed };
            let tree = grow_tree(&data, learner.as_ref(), &config)?;
            write_csv_rows(create(&log_path)?, tree.log())?;
            let loss = mc_tree_misclassification(&tree, &data, trials, seed)?;
            let calls = tree.weak_learner_calls();
            (Model::Ptree(tree), calls, loss)
        }
        Algo::Matryoshka => {
            let scoring = match args.scoring.unwrap_or(ScoringArg::Inherited) {
                ScoringArg::Inherited => CompositeScoring::Inherited,
                ScoringArg::Refit => CompositeScoring::Refit,
            };
            let config = MatryoshkaConfig { q_source, seed, scoring };
            params.insert("scoring".to_string(), format!("{scoring:?}").to_lowercase());
            let tree = match args.mode.unwrap_or(Mode::Fixed2) {
                Mode::Fixed2 => {
                    let levels = match (args.l, t) {
                        (Some(l), Some(t)) => {
                            ensure!(1usize.checked_shl(l) == Some(t), "fixed2 needs --T = 2^L, got T={t}, L={l}");
                            l
                        }
                        (Some(l), None) => l,
                        (None, Some(t)) => {
                            ensure!(t.is_power_of_two() && t >= 2, "fixed2 needs --T to be a power of two >= 2");
                            t.trailing_zeros()
                        }
                        (None, None) => 3,
                    };
                    params.insert("mode".to_string(), format!("fixed2:L={levels}"));
                    let tree = build_fixed_2_matryoshka(&data, learner.as_ref(), levels, &config)?;
                    write_csv_rows(create(&log_path)?, tree.log())?;
                    tree
                }
                Mode::Greedy => {
                    let basis = match args.basis.unwrap_or(BasisArg::PerNode) {
                        BasisArg::PerNode => RateBasis::PerNode,
                        BasisArg::PerSecond => RateBasis::PerSecond,
                    };
                    params.insert("mode".to_string(), format!("greedy:{basis:?}"));
                    let stop = StopRule::nodes(t.unwrap_or(16));
                    let clock = SystemStopwatch::default();
                    let build = build_greedy_matryoshka(&data, learner.as_ref(), &stop, basis, &config, &clock)?;
                    write_csv_rows(create(&log_path)?, &build.log)?;
                    build.tree
                }
            };
            let loss = mc_tree_misclassification(&tree, &data, trials, seed)?;
            let calls = tree.weak_learner_calls();
            (Model::Matryoshka(tree), calls, loss)
        }
    };

    let metadata = Metadata { seed, learner: learner.describe(), dataset_fingerprint: data.fingerprint(), params };
    let bound = model.bound();
    ModelRecord::new(model, metadata).save(&out).with_context(|| format!("writing {}", out.display()))?;

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "algorithm: {}", format!("{algo:?}").to_lowercase())?;
    writeln!(stdout, "weak-learner calls: {calls}")?;
    writeln!(stdout, "recorded bound: {bound:.10}")?;
    writeln!(stdout, "training error: {:.6} +/- {:.6} ({} trials)", loss.mean, loss.std_error, loss.trials)?;
    writeln!(stdout, "model: {}", out.display())?;
    writeln!(stdout, "log: {}", log_path.display())?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let record = ModelRecord::load(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let data = match &args.data {
        Some(path) => Dataset::load_csv(path).with_context(|| format!("loading {}", path.display()))?,
        None => {
            let source = record.metadata.params.get("data").map(String::as_str).unwrap_or("");
            let Some(n) = source.strip_prefix("synthetic:") else {
                bail!("the model was trained on `{source}`; pass it with --data");
            };
            synthetic(record.metadata.seed, n.parse().context("bad synthetic size in metadata")?)?
        }
    };
    if let Some(dim) = record.metadata.params.get("dim") {
        let dim: usize = dim.parse().context("bad dimension in metadata")?;
        ensure!(dim == data.dim(), "dimension mismatch: the model expects {dim} features, the data has {}", data.dim());
    }
    let training_set = data.fingerprint() == record.metadata.dataset_fingerprint;

    let (loss, exact) = match &record.model {
        Model::Adaboost(m) => {
            let loss = mc_misclassification(m, &data, args.trials, args.seed)?;
            let exact = if m.len() > ENUMERATION_CAP {
                None
            } else if training_set {
                Some(m.exact_expected_bound(&data, &m.training_q())?)
            } else {
                m.exact_q_table(&data).ok().map(|q| m.exact_expected_bound(&data, &q)).transpose()?
            };
            (loss, exact)
        }
        Model::Ptree(t) | Model::Matryoshka(t) => {
            let loss = mc_tree_misclassification(t, &data, args.trials, args.seed)?;
            let exact = if training_set { Some(t.exact_tree_bound(&data, false)?) } else { t.exact_tree_bound(&data, true).ok() };
            (loss, exact)
        }
    };

    let mut stdout = io::stdout().lock();
    writeln!(stdout, "kind: {}", record.model.kind())?;
    writeln!(stdout, "training set: {}", if training_set { "yes" } else { "no" })?;
    writeln!(stdout, "loss: {:.6} +/- {:.6} ({} trials)", loss.mean, loss.std_error, loss.trials)?;
    match exact {
        Some(v) => writeln!(stdout, "exact exponential bound: {v:.10}")?,
        None => writeln!(stdout, "exact exponential bound: not enumerable")?,
    }
    writeln!(stdout, "recorded bound: {:.10}", record.model.bound())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Figure(args) => cmd_figure(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Rates(args) => cmd_rates(args),
    }
}
