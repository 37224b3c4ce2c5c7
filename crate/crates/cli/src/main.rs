use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use surveynet::conformal::ScoreWeighting;
use surveynet::numnet::gradcheck::gradient_battery;
use surveynet::pipeline::{run_coverage, run_nhanes, run_simulation, CoverageMethod, ExperimentConfig, NhanesConfig};
use surveynet::survey::{oracle::brute_force_quantile, Scenario, WeightedEmpirical};
use surveynet::{Error, ErrorKind};

/// Relative error above which the gradient check fails.
const GRADCHECK_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "surveynet", version, about = "Survey-weighted neural networks and conformal prediction sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo classifier study under the two-stage cluster design.
    Simulate(SimulateArgs),
    /// Monte-Carlo coverage study of conformal prediction sets.
    Coverage(CoverageArgs),
    /// Fit and evaluate the diabetes screening models on an NHANES extract.
    Nhanes(NhanesArgs),
    /// Compare backprop gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Compare the sort-based weighted quantile with a brute-force scan.
    QuantileOracle(QuantileArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Population sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Replicates per population size.
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Nominal coverage levels, comma separated (e.g. 0.8,0.9,0.95).
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    #[arg(long)]
    method: Option<CoverageMethod>,
    #[arg(long)]
    score_weighting: Option<ScoreWeighting>,
}

#[derive(Args)]
struct NhanesArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model ids 1..7, comma separated.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<u8>>,
    /// Nominal coverage level of the prediction sets.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    score_weighting: Option<ScoreWeighting>,
    /// Random re-splits per model.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 20)]
    networks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
}

#[derive(Args)]
struct QuantileArgs {
    /// Atom values, comma separated; omit to run random cases.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    /// Atom masses, comma separated (default: all ones).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    infinity_mass: f64,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    /// Random cases to check when no values are given.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg: ExperimentConfig = read_config(args.config.as_deref())?;
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    if let Some(n) = &args.n {
        cfg.population_sizes = n.clone();
    }
    if let Some(b) = args.reps {
        cfg.replicates = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let cfg = experiment_config(&args.common)?;
    let out = run_simulation(&cfg)?;
    out.write(&args.common.out)?;
    write_json(&args.common.out.join("config.json"), &cfg)?;
    for s in out.summary.iter().filter(|s| s.metric == "auc" || s.metric == "accuracy") {
        println!("scenario {} N={} {} = {:.4} (sd {:.4})", s.scenario.name(), s.population_size, s.metric, s.mean, s.sd);
    }
    Ok(())
}

fn coverage(args: CoverageArgs) -> Result<(), Error> {
    let mut cfg = experiment_config(&args.common)?;
    if let Some(a) = args.alpha {
        cfg.levels = a;
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(w) = args.score_weighting {
        cfg.score_weighting = w;
    }
    let out = run_coverage(&cfg)?;
    out.write(&args.common.out)?;
    write_json(&args.common.out.join("config.json"), &cfg)?;
    for s in &out.summary {
        println!(
            "N={} level {}: mean coverage {:.4}, IQR {:.4}, mean set size {:.3}",
            s.population_size, s.level, s.mean, s.iqr, s.mean_set_size
        );
    }
    Ok(())
}

fn nhanes(args: NhanesArgs) -> Result<(), Error> {
    let mut cfg: NhanesConfig = read_config(args.config.as_deref())?;
    if let Some(d) = args.data {
        cfg.data = d;
    }
    if cfg.data.as_os_str().is_empty() {
        return Err(Error::Config("--data is required".into()));
    }
    if let Some(m) = args.models {
        cfg.models = m;
    }
    if let Some(a) = args.alpha {
        cfg.level = a;
    }
    if let Some(w) = args.score_weighting {
        cfg.score_weighting = w;
    }
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = run_nhanes(&cfg)?;
    out.write(&args.out)?;
    write_json(&args.out.join("config.json"), &cfg)?;
    if out.load.warning_count() > 0 {
        eprintln!("warning: {} rows dropped for invalid values", out.load.warning_count());
    }
    println!("{} rows, ages {}..{}", out.rows, out.age_range.0, out.age_range.1);
    for r in &out.reports {
        println!(
            "model {}: AUC {:.3} (sd {:.3}), accuracy {:.3}, coverage {:.3}, mean set size {:.3}",
            r.model, r.metrics.auc, r.auc_sd, r.metrics.accuracy, r.conformal.coverage, r.conformal.mean_set_size
        );
    }
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<(), Error> {
    let cases = gradient_battery(args.networks, args.seed, args.step)?;
    let worst = cases.iter().map(|c| c.relative_error).fold(0.0, f64::max);
    for c in &cases {
        println!("case {:3} {:>28} params {:4} rel.err {:.3e}", c.case, format!("{:?}", c.loss), c.param_count, c.relative_error);
    }
    println!("{} checks, worst relative error {worst:.3e}", cases.len());
    if worst >= GRADCHECK_TOLERANCE || !worst.is_finite() {
        return Err(Error::InvalidState(format!("gradient check failed: {worst:.3e} >= {GRADCHECK_TOLERANCE:e}")));
    }
    Ok(())
}

fn quantile_oracle(args: QuantileArgs) -> Result<(), Error> {
    let check = |values: &[f64], masses: &[f64], inf: f64, level: f64| -> Result<(f64, f64), Error> {
        let fast = WeightedEmpirical::with_infinity(values, masses, inf)?.quantile(level)?;
        Ok((fast, brute_force_quantile(values, masses, inf, level)))
    };
    if let Some(values) = args.values {
        let masses = args.weights.unwrap_or_else(|| vec![1.0; values.len()]);
        if masses.len() != values.len() {
            return Err(Error::Config(format!("{} values but {} weights", values.len(), masses.len())));
        }
        let (fast, slow) = check(&values, &masses, args.infinity_mass, args.level)?;
        println!("quantile {fast} (brute force {slow})");
        if fast != slow {
            return Err(Error::InvalidState("sorted and brute-force quantiles disagree".into()));
        }
        return Ok(());
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut mismatches = 0;
    for _ in 0..args.cases {
        let n = rng.random_range(1..40);
        // small integer grids force ties
        let values: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..12u8))).collect();
        let masses: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(1..6u8))).collect();
        let inf = if rng.random_bool(0.3) { f64::from(rng.random_range(1..4u8)) } else { 0.0 };
        let level = rng.random_range(0.01..1.0);
        let (fast, slow) = check(&values, &masses, inf, level)?;
        if fast != slow {
            mismatches += 1;
            eprintln!("mismatch: level {level}, values {values:?}, masses {masses:?}: {fast} vs {slow}");
        }
    }
    println!("{} random cases, {mismatches} mismatches", args.cases);
    if mismatches > 0 {
        return Err(Error::InvalidState(format!("{mismatches} quantile mismatches")));
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Coverage(a) => coverage(a),
        Command::Nhanes(a) => nhanes(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::QuantileOracle(a) => quantile_oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
