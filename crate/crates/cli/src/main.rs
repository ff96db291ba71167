use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use betaspec::covfit::{CovFitProblem, CovObjective, COVFIT_OPTIONS};
use betaspec::simlab::{
    self, BankSpec, ExperimentConfig, PriorSpec, DEFAULT_SEED, EXPERIMENTS,
};
use betaspec::spectapprox::{DualProblem, Family, SPECTAPPROX_OPTIONS};
use betaspec::spectra::{self, DEFAULT_GRID};
use betaspec::{Error, FilterBank, FrequencyGrid, NewtonOptions, SpectrumGrid, SymmetricMatrix};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

/// Spectral estimation with the Beta divergence family.
///
/// Exit codes: 0 success, 1 other failure, 2 usage/parse error or missing
/// file, 3 dimension or grid mismatch, 4 input not positive definite,
/// 5 iteration limit reached (partial report written), 6 identity not in
/// Range Gamma after whitening.
#[derive(Parser, Debug)]
#[command(name = "betaspec", version)]
struct Cli {
    /// Print every numeric default and the built-in experiment configs, then exit.
    #[arg(long)]
    show_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Beta divergence S(Φ‖Ψ) between two sampled spectra.
    Divergence(DivergenceArgs),
    /// Fit a state covariance compatible with the filter bank.
    Covfit(CovfitArgs),
    /// Solve the spectrum approximation problem for a prior, bank and covariance.
    Estimate(EstimateArgs),
    /// Run one of the built-in simulation studies.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug)]
#[group(id = "index", required = true, multiple = false)]
struct IndexArgs {
    /// Beta parameter (0 is Itakura-Saito, 1 is Kullback-Leibler).
    #[arg(long, group = "index", allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Integer index with beta = 1 - 1/nu.
    #[arg(long, group = "index", value_parser = clap::value_parser!(u32).range(1..))]
    nu: Option<u32>,
}

#[derive(Args, Debug)]
struct DivergenceArgs {
    phi: PathBuf,
    psi: PathBuf,
    #[command(flatten)]
    index: IndexArgs,
}

#[derive(Args, Debug, Clone, Copy)]
struct SolverArgs {
    /// Gradient-norm tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Armijo constant in (0, 1/2).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, mut base: NewtonOptions) -> NewtonOptions {
        if let Some(e) = self.eps {
            base.tolerance = e;
        }
        if let Some(a) = self.alpha {
            base.alpha = a;
        }
        if let Some(m) = self.max_iter {
            base.max_iterations = m;
        }
        base
    }
}

#[derive(Args, Debug)]
struct CovfitArgs {
    /// Sample state covariance, one matrix row per line.
    sigma: PathBuf,
    /// Filter bank config (JSON).
    bank: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    nu: u32,
    /// Use the Kullback-Leibler member instead of `--nu`.
    #[arg(long, conflicts_with = "nu")]
    kl: bool,
    /// Output directory for `covfit.json`; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Prior: a spectrum (CSV or JSON) or a prior config (JSON with a "type" field).
    psi: PathBuf,
    /// Filter bank config (JSON).
    bank: PathBuf,
    /// State covariance, one matrix row per line.
    sigma: PathBuf,
    #[arg(long, num_args = 1.., default_values_t = [1u32], value_parser = clap::value_parser!(u32).range(1..))]
    nu: Vec<u32>,
    /// Grid size K; must agree with a sampled prior.
    #[arg(long)]
    grid: Option<usize>,
    /// Replace a covariance outside Range Gamma by its covariance-fitting estimate.
    #[arg(long)]
    fit_cov: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    /// Built-in experiment name.
    #[arg(long, required_unless_present = "config")]
    experiment: Option<String>,
    /// Experiment config file (JSON), as printed by `--show-defaults`.
    #[arg(long, conflicts_with = "experiment")]
    config: Option<PathBuf>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, num_args = 1.., value_parser = clap::value_parser!(u32).range(1..))]
    nu: Vec<u32>,
    /// Output directory; defaults to `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved experiment config and exit.
    #[arg(long)]
    show_defaults: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse(_) | Error::Json(_) | Error::Io(_) | Error::InvalidArgument(_) => 2,
            Error::GridMismatch(_) | Error::Dimension(_) => 3,
            Error::NotPositiveDefinite { .. } | Error::NonPositiveInput(_) => 4,
            Error::MaxIterationsExceeded { .. } => 5,
            Error::NotInRangeGamma { .. } => 6,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (&cli.command, cli.show_defaults) {
        (_, true) => show_defaults(),
        (Some(Command::Divergence(a)), _) => cmd_divergence(a),
        (Some(Command::Covfit(a)), _) => cmd_covfit(a),
        (Some(Command::Estimate(a)), _) => cmd_estimate(a),
        (Some(Command::Reproduce(a)), _) => cmd_reproduce(a),
        (None, false) => Err(Failure::usage("no subcommand given; see --help")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn print_json(v: &Value) -> CliResult<()> {
    print_line(&serde_json::to_string_pretty(v).map_err(Error::from)?)
}

/// Writes to stdout; a closed pipe on the reading side is not an error.
fn print_line(s: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{s}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e).into()),
        _ => Ok(()),
    }
}

fn show_defaults() -> CliResult<()> {
    let experiments: serde_json::Map<String, Value> = EXPERIMENTS
        .iter()
        .map(|&name| {
            let cfg = ExperimentConfig::builtin(name).expect("built-in experiment");
            (name.to_string(), serde_json::to_value(cfg).expect("serializable config"))
        })
        .collect();
    print_json(&json!({
        "grid": DEFAULT_GRID,
        "seed": DEFAULT_SEED,
        "spectapprox": SPECTAPPROX_OPTIONS,
        "covfit": COVFIT_OPTIONS,
        "experiments": experiments,
    }))
}

/// Twelve significant digits; exact zero below `1e-12`.
fn format_value(v: f64) -> String {
    if v.abs() < 1e-12 {
        return "0.000000000000".into();
    }
    let exponent = v.abs().log10().floor() as i32;
    if (-4..12).contains(&exponent) {
        let decimals = (11 - exponent).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        format!("{v:.11e}")
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn read_spectrum(path: &Path) -> CliResult<SpectrumGrid<f64>> {
    let text = read_text(path)?;
    let parsed = if is_json(path) {
        SpectrumGrid::from_json(&text)
    } else {
        SpectrumGrid::from_csv(&text)
    };
    parsed.map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads a square matrix; blank lines and lines starting with `#` are skipped.
fn read_matrix(path: &Path) -> CliResult<SymmetricMatrix<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split([',', ' ', '\t'])
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Failure::usage(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Failure {
            code: 3,
            message: format!("{}: expected a square matrix", path.display()),
        });
    }
    let m = nalgebra_matrix(&rows);
    let gap = (&m - m.transpose()).norm();
    if gap > 1e-10 * m.norm().max(1.0) {
        return Err(Failure::usage(format!("{}: matrix is not symmetric", path.display())));
    }
    SymmetricMatrix::new(m).map_err(|e| with_path(e, path))
}

fn nalgebra_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// A bank config is either a bare bank description or an object with a `bank` field.
fn read_bank(path: &Path) -> CliResult<BankSpec> {
    let text = read_text(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| with_path(e.into(), path))?;
    let spec = v.get("bank").cloned().unwrap_or(v);
    serde_json::from_value(spec).map_err(|e| with_path(e.into(), path))
}

fn resolve_grid(explicit: Option<usize>, sampled: Option<&SpectrumGrid<f64>>) -> CliResult<FrequencyGrid> {
    match (explicit, sampled) {
        (Some(k), Some(psi)) if k != psi.grid().len() => Err(Failure {
            code: 3,
            message: format!("--grid {k} does not match the prior's {} samples", psi.grid().len()),
        }),
        (_, Some(psi)) => Ok(*psi.grid()),
        (k, None) => FrequencyGrid::new(k.unwrap_or(DEFAULT_GRID)).map_err(|e| Failure::usage(e.to_string())),
    }
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(v).map_err(Error::from)?)
        .map_err(|e| Failure::from(Error::Io(e)))
}

fn partial_report(e: &Error) -> Option<Value> {
    match e {
        Error::MaxIterationsExceeded {
            iterations,
            gradient_norm,
            trace,
        } => Some(json!({
            "status": "max_iterations_exceeded",
            "iterations": iterations,
            "gradient_norm": gradient_norm,
            "trace": trace,
        })),
        _ => None,
    }
}

fn cmd_divergence(args: &DivergenceArgs) -> CliResult<()> {
    let phi = read_spectrum(&args.phi)?;
    let psi = read_spectrum(&args.psi)?;
    spectra::check_compatible(&phi, &psi)?;
    let value = match (args.index.beta, args.index.nu) {
        (Some(beta), None) => spectra::beta_divergence(&phi, &psi, beta)?,
        (None, Some(nu)) => spectra::nu_divergence(&phi, &psi, nu)?,
        _ => return Err(Failure::usage("exactly one of --beta and --nu is required")),
    };
    print_line(&format_value(value))
}

fn cmd_covfit(args: &CovfitArgs) -> CliResult<()> {
    let sigma = read_matrix(&args.sigma)?;
    let spec = read_bank(&args.bank)?;
    let bank = spec.build(FrequencyGrid::new(DEFAULT_GRID)?)?;
    let kind = if args.kl {
        CovObjective::KullbackLeibler
    } else {
        CovObjective::Nu(args.nu)
    };
    let options = args.solver.apply(COVFIT_OPTIONS);
    let outcome = CovFitProblem::new(&sigma, &bank, kind).and_then(|p| p.solve(&options));
    let (report, failure) = match outcome {
        Ok(fit) => (fit.to_json(), None),
        Err(e) => match partial_report(&e) {
            Some(r) => (r, Some(Failure::from(e))),
            None => return Err(e.into()),
        },
    };
    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(Error::from)?;
            write_json(&dir.join("covfit.json"), &report)?;
        }
        None => print_json(&report)?,
    }
    failure.map_or(Ok(()), Err)
}

enum Prior {
    Sampled(SpectrumGrid<f64>),
    Spec(PriorSpec),
}

fn read_prior(path: &Path) -> CliResult<Prior> {
    if is_json(path) || path.extension().is_some_and(|e| e == "cfg") {
        let text = read_text(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| with_path(e.into(), path))?;
        if v.get("dim").is_none() {
            let spec = v.get("prior").cloned().unwrap_or(v);
            let spec = serde_json::from_value(spec).map_err(|e| with_path(e.into(), path))?;
            return Ok(Prior::Spec(spec));
        }
    }
    read_spectrum(path).map(Prior::Sampled)
}

fn cmd_estimate(args: &EstimateArgs) -> CliResult<()> {
    let prior = read_prior(&args.psi)?;
    let spec = read_bank(&args.bank)?;
    let sigma = read_matrix(&args.sigma)?;
    let grid = resolve_grid(
        args.grid,
        match &prior {
            Prior::Sampled(p) => Some(p),
            Prior::Spec(_) => None,
        },
    )?;
    let bank = spec.build(grid)?;
    let psi = match prior {
        Prior::Sampled(p) => p,
        Prior::Spec(s) => s.build(grid, bank.input_dim(), None, None)?,
    };
    if psi.dim() != bank.input_dim() {
        return Err(Failure {
            code: 3,
            message: format!("prior has dimension {}, bank has {} inputs", psi.dim(), bank.input_dim()),
        });
    }
    let options = args.solver.apply(SPECTAPPROX_OPTIONS);
    let covfit_options = args.solver.apply(COVFIT_OPTIONS);
    std::fs::create_dir_all(&args.out).map_err(Error::from)?;

    let mut summary = Vec::new();
    for &nu in &args.nu {
        match estimate_one(&psi, &bank, &sigma, nu, args.fit_cov, &options, &covfit_options) {
            Ok((phi, report)) => {
                phi.write_csv(&args.out.join(format!("phi_nu{nu}.csv")))?;
                write_json(&args.out.join(format!("report_nu{nu}.json")), &report)?;
                summary.push(json!({
                    "nu": nu,
                    "divergence": report["report"]["divergence"],
                    "residual": report["report"]["constraint_residual"],
                    "peak": report["peak"],
                    "iterations": report["iterations"],
                }));
            }
            Err(e) => {
                if let Some(partial) = partial_report(&e) {
                    write_json(&args.out.join(format!("report_nu{nu}.json")), &partial)?;
                }
                write_json(&args.out.join("summary.json"), &Value::Array(summary))?;
                return Err(e.into());
            }
        }
    }
    let summary = Value::Array(summary);
    write_json(&args.out.join("summary.json"), &summary)?;
    print_json(&summary)
}

fn estimate_one(
    psi: &SpectrumGrid<f64>,
    bank: &FilterBank<f64>,
    sigma: &SymmetricMatrix<f64>,
    nu: u32,
    fit_cov: bool,
    options: &NewtonOptions,
    covfit_options: &NewtonOptions,
) -> Result<(SpectrumGrid<f64>, Value), Error> {
    let (whitened, covfit) = match bank.whiten(sigma) {
        Ok(w) => (w, Value::Null),
        Err(Error::NotInRangeGamma { .. }) if fit_cov => {
            let fit = CovFitProblem::new(sigma, bank, CovObjective::Nu(nu))?.solve(covfit_options)?;
            let w = bank.whiten(&fit.p)?;
            (w, fit.to_json())
        }
        Err(e) => return Err(e),
    };
    let solution = DualProblem::new(psi, &whitened.bank, Family::Nu(nu))?.solve(options)?;
    let (peak, peak_theta) = simlab::peak(&solution.phi);
    let report = json!({
        "nu": nu,
        "report": solution.report,
        "iterations": solution.report.newton_iterations(),
        "peak": peak,
        "peak_theta": peak_theta,
        "lambda": betaspec::covfit::matrix_rows(whitened.unwhiten_multiplier(&solution.multiplier.lambda).as_matrix()),
        "covfit": covfit,
    });
    Ok((solution.phi, report))
}

fn cmd_reproduce(args: &ReproduceArgs) -> CliResult<()> {
    let mut config = match (&args.experiment, &args.config) {
        (Some(name), _) => ExperimentConfig::builtin(name).ok_or_else(|| {
            Failure::usage(format!("unknown experiment '{name}'; known: {}", EXPERIMENTS.join(", ")))
        })?,
        (None, Some(path)) => {
            let text = read_text(path)?;
            serde_json::from_str(&text).map_err(|e| with_path(e.into(), path))?
        }
        (None, None) => return Err(Failure::usage("--experiment or --config is required")),
    };
    if let Some(k) = args.grid {
        config.grid = k;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if !args.nu.is_empty() {
        config.nu = args.nu.clone();
    }
    config.options = args.solver.apply(config.options);
    config.covfit_options = args.solver.apply(config.covfit_options);
    if args.show_defaults {
        return print_json(&serde_json::to_value(&config).map_err(Error::from)?);
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&config.name));
    let outcome = simlab::run_experiment(&config)?;
    outcome.write(&out)?;
    eprintln!("wrote {}", out.display());
    print_json(&outcome.summary())
}

#[cfg(test)]
mod tests {
    use super::format_value;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_value(0.0), "0.000000000000");
        assert_eq!(format_value(3e-13), "0.000000000000");
        assert_eq!(format_value(1.0), "1.00000000000");
        assert_eq!(format_value(0.0123456789012345), "0.0123456789012");
        assert_eq!(format_value(-12.5), "-12.5000000000");
        assert_eq!(format_value(1.5e-7), "1.50000000000e-7");
    }
}
