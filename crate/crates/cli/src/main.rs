use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsid_core::bayes::{ChainConfig, GfVariant};
use bsid_core::expharness::{
    identify_dataset, risk_monte_carlo, run_experiment, write_daisy, write_report, DatasetSpec, ExperimentConfig,
    GibbsEstimator, HfpEstimator, IdentifyOptions, LsEstimator, Method, RankPolicy, RiskSetup, SvdEstimator,
    WeightPolicy,
};
use bsid_core::sysmodel::{demo_mimo, demo_siso, simulate_white_input, StateSpaceModel};
use bsid_core::SysIdError;
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Subspace identification with least squares, truncated SVD or a Gibbs sampler.
#[derive(Parser)]
#[command(name = "bsid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identify one dataset and report the validation prediction error.
    Identify(IdentifyArgs),
    /// Run a (dataset, noise level, method, trial) grid from a config file.
    Experiment(ExperimentArgs),
    /// Simulate a preset system and write a data file plus its model.
    Simulate(SimulateArgs),
    /// Monte-Carlo weighted risk of each estimator against the true H_fp.
    Risk(RiskArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Exact,
    Approx,
}

impl From<Variant> for GfVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Exact => GfVariant::Exact,
            Variant::Approx => GfVariant::IndependentApprox,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Mimo,
    Siso,
}

/// Flags that override the chain and rank settings.
#[derive(Args)]
struct Tuning {
    /// Seed for contamination and the sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Model order: a positive integer or "auto".
    #[arg(long, value_parser = parse_rank)]
    rank: Option<RankPolicy>,
    /// G_f conditional: exact Hankel structure or the independent approximation.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
    /// Total Gibbs sweeps N_F.
    #[arg(long)]
    iters: Option<usize>,
    /// Discarded sweeps N_o.
    #[arg(long)]
    burnin: Option<usize>,
}

impl Tuning {
    fn apply(&self, chain: &mut ChainConfig) {
        if let Some(v) = self.variant {
            chain.gf_variant = v.into();
        }
        if let Some(n) = self.iters {
            chain.total_iterations = n;
        }
        if let Some(n) = self.burnin {
            chain.burn_in = n;
        }
    }
}

#[derive(Args)]
struct IdentifyArgs {
    /// Experiment config whose dataset block describes the data.
    #[arg(long, conflicts_with = "data")]
    config: Option<PathBuf>,
    /// Dataset name inside the config (defaults to the first one).
    #[arg(long, requires = "config")]
    dataset: Option<String>,
    /// Whitespace-separated data file (alternative to --config).
    #[arg(long, requires_all = ["inputs", "outputs", "estimation", "validation"])]
    data: Option<PathBuf>,
    /// Comma-separated 0-based input columns.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<usize>,
    /// Comma-separated 0-based output columns.
    #[arg(long, value_delimiter = ',')]
    outputs: Vec<usize>,
    /// Estimation length N.
    #[arg(long)]
    estimation: Option<usize>,
    /// Validation length N_val.
    #[arg(long)]
    validation: Option<usize>,
    #[arg(long, default_value = "bayes-gibbs", value_parser = parse_method)]
    method: Method,
    #[command(flatten)]
    tuning: Tuning,
    /// Directory for model.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Output directory (overrides output_path).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "mimo")]
    preset: Preset,
    /// Innovation standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for data.dat and model.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RiskArgs {
    /// JSON model to simulate (defaults to the preset).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mimo")]
    preset: Preset,
    /// Innovation standard deviation of the preset.
    #[arg(long, default_value_t = 1e-3)]
    noise: f64,
    /// Coloured output contamination level.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 600)]
    samples: usize,
    /// Past and future horizon.
    #[arg(long, default_value_t = 6)]
    horizon: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[command(flatten)]
    tuning: Tuning,
    /// Directory for risk.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_rank(s: &str) -> Result<RankPolicy, String> {
    if s == "auto" {
        return Ok(RankPolicy::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
        Ok(n) => Ok(RankPolicy::Fixed(n)),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: SysIdError| e.to_string())
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<SysIdError> for Failure {
    fn from(e: SysIdError) -> Self {
        let code = match &e {
            SysIdError::Config(_) | SysIdError::InvalidArgument(_) | SysIdError::DegreesOfFreedom { .. } => EXIT_CONFIG,
            e if e.is_data_error() => EXIT_DATA,
            _ => EXIT_NUMERICAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("{}: {e}", path.display()),
        }
    }
}

fn preset_model(preset: Preset, noise: f64) -> StateSpaceModel {
    match preset {
        Preset::Mimo => demo_mimo(noise),
        Preset::Siso => demo_siso(noise),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn to_json(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("serializable value")
}

fn model_json(model: &StateSpaceModel) -> serde_json::Value {
    serde_json::to_value(model).expect("serializable model")
}

fn identify(args: IdentifyArgs) -> Result<(), Failure> {
    let (spec, mut chain, mut rank, mut seed) = match (&args.config, &args.data) {
        (Some(path), _) => {
            let cfg = ExperimentConfig::load(path)?;
            let spec = match &args.dataset {
                Some(name) => cfg
                    .datasets
                    .iter()
                    .find(|d| &d.name == name)
                    .cloned()
                    .ok_or_else(|| Failure::config(format!("no dataset named {name:?} in the config")))?,
                None => cfg.datasets[0].clone(),
            };
            (spec, cfg.chain, cfg.rank_policy, cfg.seed)
        }
        (None, Some(path)) => {
            let spec = DatasetSpec {
                name: path
                    .file_stem()
                    .map_or("data".into(), |s| s.to_string_lossy().into_owned()),
                path: path.clone(),
                input_columns: args.inputs.clone(),
                output_columns: args.outputs.clone(),
                skip_columns: Vec::new(),
                estimation_length: args.estimation.unwrap_or_default(),
                validation_length: args.validation.unwrap_or_default(),
                reuse: false,
                truth_model: None,
            };
            (spec, ChainConfig::default(), RankPolicy::Auto, 0)
        }
        (None, None) => return Err(Failure::config("identify needs --config or --data")),
    };
    args.tuning.apply(&mut chain);
    chain.validate()?;
    rank = args.tuning.rank.unwrap_or(rank);
    seed = args.tuning.seed.unwrap_or(seed);

    let opts = IdentifyOptions {
        method: args.method,
        rank_policy: rank,
        chain,
        seed,
    };
    let fit = identify_dataset(&spec, &opts)?;
    let summary = serde_json::json!({
        "dataset": spec.name,
        "method": args.method.label(),
        "row_length": fit.row_length.i,
        "rank": fit.rank,
        "npe": fit.npe.value,
        "excluded_channels": fit.npe.excluded,
        "model": model_json(&fit.model),
    });
    if let Some(dir) = &args.out {
        write_file(&dir.join("model.json"), &to_json(&model_json(&fit.model)))?;
    }
    println!("{}", to_json(&summary));
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    args.tuning.apply(&mut cfg.chain);
    if let Some(r) = args.tuning.rank {
        cfg.rank_policy = r;
    }
    if let Some(s) = args.tuning.seed {
        cfg.seed = s;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    cfg.validate()?;
    let report = run_experiment(&cfg)?;
    write_report(&cfg, &report, &cfg.output_path)?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.failures {
        eprintln!(
            "failed: {} a={} {} t{}: {}",
            f.dataset, f.alpha, f.method, f.trial, f.reason
        );
    }
    println!("{:<24} {:>8} {:<14} {:>10}", "dataset", "alpha", "method", "mean npe");
    for row in &report.summary {
        println!(
            "{:<24} {:>8} {:<14} {:>10.5}",
            row.dataset, row.alpha, row.method, row.mean_npe
        );
    }
    println!(
        "{} records, {} failures, written to {}",
        report.records.len(),
        report.failures.len(),
        cfg.output_path.display()
    );
    if report.records.is_empty() {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: "every cell failed".into(),
        });
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    if args.noise.is_nan() || args.noise < 0.0 {
        return Err(Failure::config("--noise must be nonnegative"));
    }
    let model = preset_model(args.preset, args.noise);
    let sim = simulate_white_input(&model, args.samples, 200, args.seed)?;
    let data = args.out.join("data.dat");
    fs::create_dir_all(&args.out).map_err(|e| Failure::io(&args.out, e))?;
    write_daisy(&data, &sim.data)?;
    write_file(&args.out.join("model.json"), &to_json(&model_json(&model)))?;
    println!(
        "wrote {} samples ({} inputs then {} outputs per row) to {}",
        args.samples,
        model.n_i(),
        model.n_o(),
        data.display()
    );
    Ok(())
}

fn risk(args: RiskArgs) -> Result<(), Failure> {
    let model = match &args.model {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            let model: StateSpaceModel =
                serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            model.validate()?;
            model
        }
        None => preset_model(args.preset, args.noise),
    };
    let rank = match args.tuning.rank.unwrap_or(RankPolicy::Fixed(model.n_x())) {
        RankPolicy::Fixed(r) => r,
        RankPolicy::Auto => model.n_x(),
    };
    let mut chain = ChainConfig::default();
    args.tuning.apply(&mut chain);
    chain.validate()?;
    let gibbs = GibbsEstimator { rank, chain };
    let svd = SvdEstimator { rank };
    let estimators: [&dyn HfpEstimator; 3] = [&LsEstimator, &svd, &gibbs];
    let setup = RiskSetup {
        f: args.horizon,
        p: args.horizon,
        samples: args.samples,
        trials: args.trials,
        alpha: args.alpha,
        seed: args.tuning.seed.unwrap_or(0),
        weights: WeightPolicy::Default,
    };
    let summaries = risk_monte_carlo(&model, &estimators, &setup)?;
    let mut csv = String::from("method,mean,std_err,failures\n");
    println!("{:<14} {:>12} {:>10} {:>8}", "method", "mean risk", "std err", "failed");
    for s in &summaries {
        println!(
            "{:<14} {:>12.4} {:>10.4} {:>8}",
            s.method, s.mean, s.std_err, s.failures
        );
        csv.push_str(&format!("{},{},{},{}\n", s.method, s.mean, s.std_err, s.failures));
    }
    if let Some(dir) = &args.out {
        write_file(&dir.join("risk.csv"), &csv)?;
    }
    if summaries.iter().all(|s| s.failures == args.trials) {
        return Err(Failure {
            code: EXIT_NUMERICAL,
            message: "every estimator failed on every trial".into(),
        });
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Identify(a) => identify(a),
        Command::Experiment(a) => experiment(a),
        Command::Simulate(a) => simulate(a),
        Command::Risk(a) => risk(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
