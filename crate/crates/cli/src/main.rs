//! `fracspde`: simulate, estimate, run experiments and check models.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 numerical failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracspde::accel::{aitken, weighted_average, AitkenVariant, EstimateSequence};
use fracspde::exact::{exact_hurst, exact_hurst_auto, exact_joint, exact_theta};
use fracspde::fbm::{FbmMethod, FbmSampler};
use fracspde::grid::TimeGrid;
use fracspde::harness::{bundled_plan, bundled_plan_names, provenance_comment, run_experiment, ExperimentPlan};
use fracspde::mkernel::KernelTransform;
use fracspde::mle::{mle_geometric_with, mle_mode_with, EstimateReport};
use fracspde::solution::{read_mode_csv, simulate_modes, LogPaths};
use fracspde::specmodel::{validate_parabolicity, ModelDocument, ModelParams, ParamValue, SpectralModel};
use fracspde::Error;

const OUT_DIR_ENV: &str = "FRACSPDE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "fracspde",
    version,
    about = "SPDEs driven by multiplicative fractional Brownian motion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the Fourier modes; writes modes.csv and driver.csv.
    Simulate {
        #[command(flatten)]
        model: ModelSource,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Apply estimators to a simulated or observed modes.csv; writes estimates.csv.
    Estimate {
        #[command(flatten)]
        model: ModelSource,
        /// Mode table with columns t,u_1,...,u_K.
        #[arg(long)]
        input: PathBuf,
        /// Estimator spec, repeatable: mle_mode@K, mle_geometric@K,
        /// weighted_avg@N, aitken@K, exact_theta@K,M, exact_hurst@K,M,
        /// exact_joint@K,M;I,J.
        #[arg(long = "estimator", short = 'e', required = true)]
        estimators: Vec<String>,
        /// Observation time (a grid point); defaults to the last one.
        #[arg(long)]
        at: Option<f64>,
        #[arg(long, default_value = "as_printed")]
        aitken_variant: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run an experiment plan (a TOML file or the name of a bundled plan).
    Experiment {
        plan: String,
        /// Also write per-replication estimates.
        #[arg(long)]
        raw: bool,
        /// Override the plan's replication count.
        #[arg(long)]
        replications: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check the parabolicity conditions; exit status 0 iff they hold.
    Check {
        #[command(flatten)]
        model: ModelSource,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        /// θ interval as LO,HI; defaults to the model's θ.
        #[arg(long)]
        theta_range: Option<String>,
        /// Constants C1,C2 to test against instead of the observed ones.
        #[arg(long)]
        bounds: Option<String>,
    },
    /// List the bundled experiment plans.
    Plans,
}

#[derive(Args, Debug)]
struct ModelSource {
    /// Model document (TOML, `schema = 1`).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    model: Option<PathBuf>,
    /// Builtin model: heat_1d or laplacian_power.
    #[arg(long)]
    builtin: Option<String>,
    /// Builtin parameter NAME=VALUE (lists as comma-separated values).
    #[arg(long = "param", short = 'p', requires = "builtin")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 256)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "circulant")]
    method: String,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory (default: $FRACSPDE_OUT_DIR, else the working directory).
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

/// Error carrying its exit status.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CliResult<u8> {
    match command {
        Command::Simulate { model, grid, out } => simulate(&model, &grid, &out),
        Command::Estimate {
            model,
            input,
            estimators,
            at,
            aitken_variant,
            out,
        } => estimate(&model, &input, &estimators, at, &aitken_variant, &out),
        Command::Experiment {
            plan,
            raw,
            replications,
            out,
        } => experiment(&plan, raw, replications, &out),
        Command::Check {
            model,
            delta,
            theta_range,
            bounds,
        } => check(&model, delta, theta_range.as_deref(), bounds.as_deref()),
        Command::Plans => {
            for name in bundled_plan_names() {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

fn parse_params(raw: &[String]) -> CliResult<ModelParams> {
    let mut params = ModelParams::new();
    for p in raw {
        let (name, value) = p
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--param expects NAME=VALUE, got '{p}'")))?;
        let value: ParamValue = value.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        params.insert(name.trim().to_string(), value);
    }
    Ok(params)
}

fn load_model(src: &ModelSource) -> CliResult<SpectralModel> {
    match (&src.model, &src.builtin) {
        (Some(path), None) => Ok(SpectralModel::load(path)?),
        (None, Some(name)) => Ok(ModelDocument::builtin(name, parse_params(&src.params)?).into_model()?),
        _ => Err(Failure::Usage("give exactly one of --model or --builtin".into())),
    }
}

fn out_dir(out: &OutArgs) -> CliResult<PathBuf> {
    let dir = out.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Validation(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Validation(format!("cannot write {}: {e}", path.display())))
}

fn simulate(src: &ModelSource, grid: &GridArgs, out: &OutArgs) -> CliResult<u8> {
    let model = load_model(src)?;
    let method: FbmMethod = grid.method.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let time = TimeGrid::new(grid.horizon, grid.steps)?;
    let driver = FbmSampler::new(time, model.hurst, method)?.sample(grid.seed, 0);
    let paths = simulate_modes(&model, time, &driver)?;
    let dir = out_dir(out)?;
    let comment = provenance_comment(Some(grid.seed), &[model.hurst]);
    let mut w = create(&dir.join("modes.csv"))?;
    writeln!(w, "{comment}")?;
    paths.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("driver.csv"))?;
    writeln!(w, "{comment}")?;
    driver.write_csv(&mut w)?;
    w.flush()?;
    Ok(0)
}

#[derive(Debug, Clone, PartialEq)]
enum EstimatorSpec {
    MleMode(usize),
    MleGeometric(usize),
    WeightedAvg(usize),
    Aitken(usize),
    ExactTheta(usize, usize),
    ExactHurst(usize, usize),
    ExactJoint((usize, usize), (usize, usize)),
}

fn parse_index(s: &str) -> CliResult<usize> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| Failure::Usage(format!("'{s}' is not a mode index")))
}

fn parse_pair(s: &str) -> CliResult<(usize, usize)> {
    match s.split(',').collect::<Vec<_>>()[..] {
        [a, b] => Ok((parse_index(a)?, parse_index(b)?)),
        _ => Err(Failure::Usage(format!("expected a pair K,M, got '{s}'"))),
    }
}

fn parse_estimator(spec: &str) -> CliResult<EstimatorSpec> {
    let (name, arg) = spec
        .split_once('@')
        .ok_or_else(|| Failure::Usage(format!("estimator '{spec}' needs @arguments, e.g. mle_mode@1")))?;
    Ok(match name {
        "mle_mode" => EstimatorSpec::MleMode(parse_index(arg)?),
        "mle_geometric" => EstimatorSpec::MleGeometric(parse_index(arg)?),
        "weighted_avg" => EstimatorSpec::WeightedAvg(parse_index(arg)?),
        "aitken" => EstimatorSpec::Aitken(parse_index(arg)?),
        "exact_theta" => {
            let (k, m) = parse_pair(arg)?;
            EstimatorSpec::ExactTheta(k, m)
        }
        "exact_hurst" => {
            let (k, m) = parse_pair(arg)?;
            EstimatorSpec::ExactHurst(k, m)
        }
        "exact_joint" => match arg.split(';').collect::<Vec<_>>()[..] {
            [a, b] => EstimatorSpec::ExactJoint(parse_pair(a)?, parse_pair(b)?),
            _ => return Err(Failure::Usage(format!("exact_joint expects K,M;I,J, got '{arg}'"))),
        },
        other => return Err(Failure::Usage(format!("unknown estimator '{other}'"))),
    })
}

impl EstimatorSpec {
    fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::MleMode(_) => "mle_mode",
            EstimatorSpec::MleGeometric(_) => "mle_geometric",
            EstimatorSpec::WeightedAvg(_) => "weighted_avg",
            EstimatorSpec::Aitken(_) => "aitken",
            EstimatorSpec::ExactTheta(..) => "exact_theta",
            EstimatorSpec::ExactHurst(..) => "exact_hurst",
            EstimatorSpec::ExactJoint(..) => "exact_joint",
        }
    }

    fn modes(&self) -> Vec<usize> {
        match *self {
            EstimatorSpec::MleMode(k) | EstimatorSpec::MleGeometric(k) => vec![k],
            EstimatorSpec::WeightedAvg(n) => (1..=n).collect(),
            EstimatorSpec::Aitken(k) => vec![k, k + 1, k + 2],
            EstimatorSpec::ExactTheta(k, m) | EstimatorSpec::ExactHurst(k, m) => vec![k, m],
            EstimatorSpec::ExactJoint(a, b) => vec![a.0, a.1, b.0, b.1],
        }
    }
}

struct EstimateContext<'a> {
    logs: &'a LogPaths,
    t_index: usize,
    explicit_time: bool,
    transform: KernelTransform,
    variant: AitkenVariant,
}

impl EstimateContext<'_> {
    fn mle_sequence(&self, upto: usize) -> Result<EstimateSequence, Error> {
        let weights = self.transform.weights(self.logs.grid, self.t_index)?;
        let values = (1..=upto)
            .map(|k| mle_mode_with(self.logs, k, &weights).map(|r| r.value.primary()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EstimateSequence::new(values, self.logs.grid.point(self.t_index)))
    }

    fn run(&self, spec: &EstimatorSpec) -> Result<EstimateReport, Error> {
        let logs = self.logs;
        let model = &logs.model;
        match *spec {
            EstimatorSpec::MleMode(k) => mle_mode_with(logs, k, &self.transform.weights(logs.grid, self.t_index)?),
            EstimatorSpec::MleGeometric(k) => {
                // mode k viewed as geometric fBM: estimates its drift α_k
                let weights = self.transform.weights(logs.grid, self.t_index)?;
                let mu = model.mu.get(k.wrapping_sub(1)).copied().ok_or_else(|| Error::Mode {
                    mode: k,
                    reason: "no such mode".into(),
                })?;
                let mut r = mle_geometric_with(&weights, logs.mode(k)?, mu)?;
                r.modes = vec![k];
                Ok(r)
            }
            EstimatorSpec::WeightedAvg(n) => weighted_average(&self.mle_sequence(n)?, n),
            EstimatorSpec::Aitken(k) => aitken(&self.mle_sequence(k + 2)?, k, self.variant),
            EstimatorSpec::ExactTheta(k, m) => exact_theta(logs, k, m, self.t_index, model.hurst),
            EstimatorSpec::ExactHurst(k, m) if self.explicit_time => exact_hurst(logs, k, m, self.t_index, model.theta),
            EstimatorSpec::ExactHurst(k, m) => exact_hurst_auto(logs, k, m, model.theta),
            EstimatorSpec::ExactJoint(a, b) => exact_joint(logs, a, b, self.t_index),
        }
    }
}

fn seed_from_comment(path: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(path).ok()?;
    let first = text.lines().next()?;
    first
        .strip_prefix('#')?
        .split_whitespace()
        .find_map(|w| w.strip_prefix("seed="))
        .and_then(|s| s.parse().ok())
}

fn estimate(
    src: &ModelSource,
    input: &Path,
    specs: &[String],
    at: Option<f64>,
    variant: &str,
    out: &OutArgs,
) -> CliResult<u8> {
    let specs = specs
        .iter()
        .map(|s| parse_estimator(s))
        .collect::<CliResult<Vec<_>>>()?;
    let variant: AitkenVariant = variant.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let model = load_model(src)?;
    let file = File::open(input).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", input.display())))?;
    let (grid, u) = read_mode_csv(file)?;
    let logs = LogPaths::from_observed(&model, grid, &u)?;
    let t_index = match at {
        None => grid.steps(),
        Some(t) => grid
            .index_of(t)
            .filter(|&i| i > 0)
            .ok_or_else(|| Failure::Validation(format!("--at {t} is not a positive grid point")))?,
    };
    let ctx = EstimateContext {
        logs: &logs,
        t_index,
        explicit_time: at.is_some(),
        transform: KernelTransform::new(model.hurst)?,
        variant,
    };
    let dir = out_dir(out)?;
    let path = dir.join("estimates.csv");
    let mut w = create(&path)?;
    writeln!(w, "{}", provenance_comment(seed_from_comment(input), &[model.hurst]))?;
    let mut csv = csv::Writer::from_writer(&mut w);
    csv.write_record(fracspde::mle::REPORT_CSV_HEADER)
        .map_err(Error::from)?;
    let mut failures = Vec::new();
    for spec in &specs {
        match ctx.run(spec) {
            Ok(report) => csv.write_record(report.csv_record()).map_err(Error::from)?,
            Err(e) => {
                let record = EstimateReport::failed_record(spec.name(), &spec.modes(), grid.point(t_index), &e);
                csv.write_record(record).map_err(Error::from)?;
                eprintln!("warning: {}: {e}", spec.name());
                failures.push(e);
            }
        }
    }
    csv.flush()?;
    drop(csv);
    w.flush()?;
    if failures.len() == specs.len() {
        let numerical = failures.iter().all(Error::is_numerical);
        let msg = format!("all {} estimators failed", specs.len());
        return Err(if numerical {
            Failure::Numerical(msg)
        } else {
            Failure::Validation(msg)
        });
    }
    Ok(0)
}

fn experiment(plan_ref: &str, raw: bool, replications: Option<usize>, out: &OutArgs) -> CliResult<u8> {
    let mut plan = match bundled_plan(plan_ref) {
        Some(p) => p,
        None => {
            let path = Path::new(plan_ref);
            if !path.exists() {
                return Err(Failure::Validation(format!(
                    "'{plan_ref}' is neither a plan file nor a bundled plan ({})",
                    bundled_plan_names().join(", ")
                )));
            }
            ExperimentPlan::load(path)?
        }
    };
    if let Some(r) = replications {
        plan.replications = r;
    }
    plan.raw |= raw;
    plan.validate()?;
    let table = run_experiment(&plan)?;
    let dir = out_dir(out)?;
    let name = plan.output.clone().unwrap_or_else(|| format!("{}.csv", plan.name));
    let path = dir.join(&name);
    let mut w = create(&path)?;
    table.write_csv(&mut w)?;
    w.flush()?;
    if table.raw.is_some() {
        let stem = name.strip_suffix(".csv").unwrap_or(&name);
        let mut w = create(&dir.join(format!("{stem}_raw.csv")))?;
        table.write_raw_csv(&mut w)?;
        w.flush()?;
    }
    for row in table.rows.iter().filter(|r| r.flagged) {
        eprintln!(
            "warning: {} failed in {} of {} replications",
            row.label, row.failures, plan.replications
        );
    }
    println!("{}", path.display());
    Ok(0)
}

fn parse_two(s: &str, what: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |x: &str| {
        x.trim()
            .parse::<f64>()
            .map_err(|_| Failure::Usage(format!("{what}: cannot parse '{x}'")))
    };
    match parts[..] {
        [a, b] => Ok((parse(a)?, parse(b)?)),
        _ => Err(Failure::Usage(format!("{what} expects two comma-separated numbers"))),
    }
}

fn check(src: &ModelSource, delta: f64, theta_range: Option<&str>, bounds: Option<&str>) -> CliResult<u8> {
    let model = load_model(src)?;
    let range = match theta_range {
        Some(s) => parse_two(s, "--theta-range")?,
        None => (model.theta, model.theta),
    };
    let bounds = bounds.map(|b| parse_two(b, "--bounds")).transpose()?;
    let report = validate_parabolicity(&model, delta, range, bounds)?;
    println!("{report}");
    Ok(if report.holds { 0 } else { 2 })
}
