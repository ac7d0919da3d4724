use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tkmia::attack::{select_random, tkmia_attack, AttackConfig, Scheme, StopMode};
use tkmia::baselines::{run_baseline, Baseline, BaselineSpec};
use tkmia::checks;
use tkmia::dataset;
use tkmia::harness::{gen_synthetic, run_experiment, ExperimentConfig, SyntheticSpec};
use tkmia::model::{train_bce_with_history, Activation, Architecture, Scorer, TrainConfig};
use tkmia::ranking::SpecifiedSet;

#[derive(Parser)]
#[command(name = "tkmia", version, about = "Top-k multi-label attacks that leave ranking metrics intact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-label dataset as line-delimited JSON.
    GenData(GenData),
    /// Train a victim scorer on a dataset with binary cross-entropy.
    Train(Train),
    /// Attack one instance and print the outcome as JSON.
    Attack(Attack),
    /// Run an experiment config and write the CSV table and per-instance outcomes.
    Report(Report),
    /// Run the built-in property suites.
    Check(Check),
}

#[derive(Args)]
struct GenData {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 32)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    c: usize,
    #[arg(long, default_value_t = 4.0)]
    mean_relevant: f64,
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = SyntheticSpec::default().noise)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Affine,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Tanh,
    Relu,
}

#[derive(Args)]
struct Train {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "affine")]
    arch: ArchArg,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, value_enum, default_value = "tanh")]
    activation: ActivationArg,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tkmia,
    MlCwU,
    TkmlApU,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    C1Only,
    Strict,
}

#[derive(Args)]
struct Attack {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Zero-based line of the instance in the dataset file.
    #[arg(long)]
    index: usize,
    #[arg(long, value_enum, default_value = "tkmia")]
    method: MethodArg,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Comma-separated class indices to expel; drawn at random when omitted.
    #[arg(long, value_delimiter = ',')]
    specified: Vec<usize>,
    /// Size of the random specified set when `--specified` is not given.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = AttackConfig::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = AttackConfig::default().eta)]
    eta: f64,
    #[arg(long, default_value_t = AttackConfig::default().momentum)]
    momentum: f64,
    #[arg(long, default_value_t = AttackConfig::default().max_iter)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "c1-only")]
    stop: StopArg,
    /// Baseline success threshold; defaults to |S|.
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Report {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Check {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn gen_data(a: GenData) -> Result<()> {
    let spec = SyntheticSpec {
        n: a.n,
        d: a.d,
        c: a.c,
        mean_relevant: a.mean_relevant,
        correlation: a.correlation,
        noise: a.noise,
        seed: a.seed,
    };
    let data = gen_synthetic(&spec)?;
    dataset::save(&a.out, &data)?;
    eprintln!("wrote {} instances to {}", data.len(), a.out.display());
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let data = dataset::load(&a.data)?;
    let architecture = match a.arch {
        ArchArg::Affine => Architecture::Affine,
        ArchArg::Mlp => Architecture::Mlp {
            hidden: a.hidden,
            activation: match a.activation {
                ActivationArg::Tanh => Activation::Tanh,
                ActivationArg::Relu => Activation::Relu,
            },
        },
    };
    let config = TrainConfig {
        architecture,
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        batch_size: a.batch_size,
        weight_decay: a.weight_decay,
        seed: a.seed,
    };
    let (model, history) = train_bce_with_history(&data, &config)?;
    model.save(&a.out)?;
    if let Some(last) = history.last() {
        eprintln!("final training loss {last:.6}");
    }
    Ok(())
}

fn attack(a: Attack) -> Result<()> {
    let model = Scorer::load(&a.model)?;
    let data = dataset::load(&a.data)?;
    let Some(instance) = data.get(a.index) else {
        bail!("instance {} is out of range for {} instances", a.index, data.len());
    };
    let specified = if a.specified.is_empty() {
        select_random(instance, a.m, a.k, a.seed)?
    } else {
        SpecifiedSet::new(a.specified.clone())?
    };
    let config = AttackConfig {
        k: a.k,
        alpha: a.alpha,
        eta: a.eta,
        momentum: a.momentum,
        max_iter: a.max_iter,
        scheme: Scheme::Random { m: specified.len() },
        delta_threshold: a.delta,
        stop_mode: match a.stop {
            StopArg::C1Only => StopMode::C1Only,
            StopArg::Strict => StopMode::Strict,
        },
        ..Default::default()
    };
    let outcome = match a.method {
        MethodArg::Tkmia => tkmia_attack(&model, instance, &specified, &config)?,
        MethodArg::MlCwU => run_baseline(&model, instance, &specified, &BaselineSpec { method: Baseline::MlCwU, config })?,
        MethodArg::TkmlApU => run_baseline(&model, instance, &specified, &BaselineSpec { method: Baseline::TkmlApU, config })?,
    };
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}

fn report(a: Report) -> Result<()> {
    let mut config = ExperimentConfig::from_path(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let result = run_experiment(&config).with_context(|| format!("experiment {} failed", a.config.display()))?;
    print!("{}", result.csv());
    Ok(())
}

fn check(a: Check) -> Result<bool> {
    let reports = checks::run_all(a.seed)?;
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("{} of {} suites passed", reports.len() - failed, reports.len());
    Ok(failed == 0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData(a) => gen_data(a).map(|()| true),
        Command::Train(a) => train(a).map(|()| true),
        Command::Attack(a) => attack(a).map(|()| true),
        Command::Report(a) => report(a).map(|()| true),
        Command::Check(a) => check(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

