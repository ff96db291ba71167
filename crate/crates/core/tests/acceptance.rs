//! Acceptance criteria, one line of output per criterion.
//!
//! Runs without the libtest harness so the report is always printed; every
//! criterion is evaluated before the process reports failure.

mod common;

use std::time::{Duration, Instant};

use betaspec::covfit::{CovFitProblem, CovObjective, VOperator, COVFIT_OPTIONS};
use betaspec::simlab::{
    exact_state_covariance, run_experiment, sample_state_covariance, ArmaModel, BankSpec, ExperimentConfig,
    ExperimentOutcome, TargetSpec, DEFAULT_SEED,
};
use betaspec::spectapprox::{phi_kl, phi_nu, DualProblem, Family, SPECTAPPROX_OPTIONS};
use betaspec::spectra::{beta_divergence, is_divergence, kl_divergence};
use betaspec::{FilterBank, FrequencyGrid, SpectrumGrid, SymmetricMatrix};
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Frozen dominant peak heights of the ARMA comparison at `K = 2048`.
const ARMA_PEAKS: [f64; 3] = [97.5537337741474, 55.95906813614074, 50.74909294012203];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn grid(k: usize) -> FrequencyGrid {
    FrequencyGrid::new(k).unwrap()
}

/// `∫ G Φ G*` as a full-circle sum with responses formed by the bank.
fn moment_of(bank: &FilterBank<f64>, phi: &SpectrumGrid<f64>) -> DMatrix<f64> {
    let n = bank.state_dim();
    let mut acc = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..phi.grid().len() {
        let g = bank.response(k);
        acc += &g * phi.value(k).as_matrix() * g.adjoint();
    }
    acc.map(|z| z.re) / phi.grid().len() as f64
}

fn random_pair(seed: u64, k: usize) -> (SpectrumGrid<f64>, SpectrumGrid<f64>) {
    let mut r = rng(seed);
    let a = MatrixPolynomial::random(2, 2, 0.1, &mut r).spectrum(grid(k));
    let b = MatrixPolynomial::random(2, 2, 0.1, &mut r).spectrum(grid(k));
    (a, b)
}

/// Whitened ARMA(6,4) setup with the constant prior `Ψ = ∫Ω`.
fn arma_setup(k: usize) -> (SpectrumGrid<f64>, FilterBank<f64>) {
    let model = ArmaModel::benchmark();
    let bank = FilterBank::covariance_extension(6, 1, grid(k)).unwrap();
    let sigma = model.state_covariance(&bank).unwrap();
    let omega = TargetSpec::Arma(model).spectrum(grid(k)).unwrap();
    let psi = SpectrumGrid::constant(grid(k), &omega.integral().to_complex()).unwrap();
    (psi, bank.whiten(&sigma).unwrap().bank)
}

/// Random multiplier in Range Γ, shrunk until admissible for every listed `ν`.
fn admissible_lambda(problems: &[DualProblem<f64>], seed: u64) -> SymmetricMatrix<f64> {
    let basis = problems[0].basis().clone();
    let mut r = rng(seed);
    let mut lambda = basis.project(&random_symmetric(basis.state_dim(), &mut r, 1.0));
    while !problems.iter().all(|p| p.margin(&lambda).map(|m| m > 0.0).unwrap_or(false)) {
        lambda = lambda.scale(0.5);
    }
    lambda
}

fn c1_limits() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let (a, b) = random_pair(100 + seed, 1024);
        let is = is_divergence(&a, &b).unwrap();
        let kl = kl_divergence(&a, &b).unwrap();
        worst = worst.max(relative(beta_divergence(&a, &b, 1e-4).unwrap(), is));
        worst = worst.max(relative(beta_divergence(&a, &b, 1.0 - 1e-4).unwrap(), kl));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-3 && elapsed < Duration::from_secs(10),
        format!("max relative gap {worst:.2e} (bound 1e-3), {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c2_nonnegativity() -> Verdict {
    let betas = [-0.5, 0.25, 0.5, 0.75, 1.5];
    let mut min_pos = f64::INFINITY;
    let mut max_self: f64 = 0.0;
    for i in 0..50u64 {
        let beta = betas[i as usize % betas.len()];
        let (a, b) = random_pair(200 + i, 256);
        min_pos = min_pos.min(beta_divergence(&a, &b, beta).unwrap());
        max_self = max_self.max(beta_divergence(&b, &b, beta).unwrap().abs());
    }
    verdict(
        min_pos > 0.0 && max_self <= 1e-12,
        format!("min S over distinct pairs {min_pos:.3e}, max |S(Ψ‖Ψ)| {max_self:.1e}"),
    )
}

fn c3_derivatives() -> Verdict {
    let (psi, bank) = arma_setup(1024);
    let mut worst_g: f64 = 0.0;
    let mut worst_h: f64 = 0.0;
    for nu in 1..=3u32 {
        let problem = DualProblem::new(&psi, &bank, Family::Nu(nu)).unwrap();
        for trial in 0..5u64 {
            let lambda = admissible_lambda(std::slice::from_ref(&problem), 300 + 10 * u64::from(nu) + trial);
            let lambda = lambda.scale(0.5);
            let basis = problem.basis();
            let d = basis.project(&random_symmetric(basis.state_dim(), &mut rng(400 + trial), 1.0));
            let d = d.scale(1.0 / d.norm());
            let f = |t: f64| problem.dual_value(&lambda.add(&d.scale(t))).unwrap();
            let g = problem.gradient_matrix(&lambda).unwrap().inner(&d);
            let fd = central_difference(f, 1e-5);
            worst_g = worst_g.max((g - fd).abs() / fd.abs().max(1.0));
            let h = problem.hessian_apply(&lambda, &d).unwrap().inner(&d);
            // Richardson extrapolation removes the O(h²) term; the curvature
            // along some directions is in the thousands.
            let sd = (4.0 * second_difference(f, 5e-5) - second_difference(f, 1e-4)) / 3.0;
            worst_h = worst_h.max(relative(h, sd));
        }
    }
    verdict(
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("gradient {worst_g:.1e} (bound 1e-5), Hessian form {worst_h:.1e} (bound 1e-4)"),
    )
}

/// `‖g_{k+1}‖ ≤ C ‖g_k‖² + floor` on every step once `‖g_k‖ < 0.1`, with at
/// least two such steps.
fn quadratic_tail(norms: &[f64]) -> bool {
    const C: f64 = 10.0;
    const FLOOR: f64 = 1e-12;
    let steps: Vec<(f64, f64)> = norms.windows(2).map(|w| (w[0], w[1])).filter(|&(a, _)| a < 0.1).collect();
    steps.len() >= 2 && steps.iter().all(|&(a, b)| b <= C * a * a + FLOOR)
}

fn c4_moments(arma: &ExperimentOutcome, elapsed: Duration) -> Verdict {
    let bank = arma.config.bank.build(grid(arma.config.grid)).unwrap();
    let mut worst: f64 = 0.0;
    let mut max_iter = 0;
    let mut quadratic = true;
    for run in &arma.runs {
        let w = bank.whiten(&run.sigma).unwrap().bank;
        let m = moment_of(&w, &run.phi);
        worst = worst.max((m - DMatrix::identity(w.state_dim(), w.state_dim())).norm());
        max_iter = max_iter.max(run.report.newton_iterations());
        let norms: Vec<f64> = run.report.iterations.iter().map(|r| r.gradient_norm).collect();
        quadratic &= quadratic_tail(&norms);
    }
    verdict(
        worst <= 1e-6 && max_iter <= 50 && quadratic && elapsed < Duration::from_secs(60),
        format!(
            "K=2048, ‖∫GΦG* - I‖ ≤ {worst:.1e}, at most {max_iter} Newton steps, quadratic tail {quadratic}, {:.1}s for all ν",
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_nu_one() -> Verdict {
    let (psi, bank) = arma_setup(1024);
    let problem = DualProblem::new(&psi, &bank, Family::Nu(1)).unwrap();
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let lambda = admissible_lambda(std::slice::from_ref(&problem), 500 + trial);
        let phi = phi_nu(&lambda, &psi, &bank, 1).unwrap();
        let l = lambda.to_complex();
        for k in 0..psi.grid().len() {
            let g = bank.response(k);
            let inner = psi.value(k).as_matrix().clone().try_inverse().unwrap() + g.adjoint() * l.as_matrix() * &g;
            let want = inner.try_inverse().unwrap();
            worst = worst.max(cdiff(phi.value(k).as_matrix(), &want));
        }
    }
    verdict(worst <= 1e-11, format!("max pointwise deviation {worst:.1e} (bound 1e-11)"))
}

fn c6_kl_limit() -> Verdict {
    let (psi, bank) = arma_setup(2048);
    let nus = [4u32, 8, 16, 32];
    let problems: Vec<_> = nus.iter().map(|&nu| DualProblem::new(&psi, &bank, Family::Nu(nu)).unwrap()).collect();
    let opt = DualProblem::new(&psi, &bank, Family::KullbackLeibler)
        .unwrap()
        .solve(&SPECTAPPROX_OPTIONS)
        .unwrap();
    let mut lambda = opt.multiplier.lambda.scale(0.5);
    while !problems.iter().all(|p| p.margin(&lambda).unwrap() > 0.0) {
        lambda = lambda.scale(0.5);
    }
    let kl = phi_kl(&lambda, &psi, &bank).unwrap();
    let gaps: Vec<f64> = nus
        .iter()
        .map(|&nu| phi_nu(&lambda, &psi, &bank, nu).unwrap().sup_distance(&kl).unwrap())
        .collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let ratio = gaps[3] / gaps[0];
    verdict(
        decreasing && ratio <= 0.05,
        format!(
            "gaps {:.3e} {:.3e} {:.3e} {:.3e}, final/initial {ratio:.3} (bound 0.05)",
            gaps[0], gaps[1], gaps[2], gaps[3]
        ),
    )
}

fn c7_covfit() -> Verdict {
    let g = grid(2048);
    let target = TargetSpec::bivariate_bandpass();
    let bank = BankSpec::radius_08(&[0.4, 1.2, 2.0], 2).build(g).unwrap();
    let y = target.simulate(50, DEFAULT_SEED);
    let sigma_hat = sample_state_covariance(&bank, &y).unwrap();
    let v = VOperator::new(&bank).unwrap();
    let mut worst_res: f64 = 0.0;
    let mut all_pd = true;
    for nu in 1..=3 {
        let fit = CovFitProblem::new(&sigma_hat, &bank, CovObjective::Nu(nu)).unwrap().solve(&COVFIT_OPTIONS).unwrap();
        worst_res = worst_res.max(v.apply(&fit.p).unwrap().norm() / fit.p.norm());
        all_pd &= fit.p.is_positive_definite();
    }
    let exact = exact_state_covariance(&bank, &target).unwrap();
    let mut worst_fixed: f64 = 0.0;
    for nu in 1..=3 {
        let fit = CovFitProblem::new(&exact, &bank, CovObjective::Nu(nu)).unwrap().solve(&COVFIT_OPTIONS).unwrap();
        worst_fixed = worst_fixed.max(fit.p.sub(&exact).norm() / exact.norm());
    }
    let mut worst_adj: f64 = 0.0;
    let mut r = rng(700);
    for _ in 0..20 {
        let p = random_symmetric(bank.state_dim(), &mut r, 1.0);
        let d = random_symmetric(bank.state_dim(), &mut r, 1.0);
        let gap = (v.apply(&p).unwrap().inner(&d) - p.inner(&v.adjoint(&d).unwrap())).abs();
        worst_adj = worst_adj.max(gap / (p.norm() * d.norm()));
    }
    verdict(
        worst_res <= 1e-8 && all_pd && worst_fixed <= 1e-8 && worst_adj <= 1e-12,
        format!(
            "‖V(P)‖/‖P‖ ≤ {worst_res:.1e}, P ≻ 0 {all_pd}, fixed point {worst_fixed:.1e}, adjoint {worst_adj:.1e}"
        ),
    )
}

fn c8_peaks(arma: &ExperimentOutcome) -> Verdict {
    let peaks: Vec<f64> = arma.runs.iter().map(|r| r.peak).collect();
    let ordered = peaks.windows(2).all(|w| w[0] >= w[1]);
    let frozen = peaks.iter().zip(ARMA_PEAKS).all(|(a, b)| relative(*a, b) < 1e-9);
    verdict(
        ordered && frozen,
        format!("peaks {:.6} ≥ {:.6} ≥ {:.6}, regression match {frozen}", peaks[0], peaks[1], peaks[2]),
    )
}

fn c9_feasible_prior() -> Verdict {
    let mut worst: f64 = 0.0;
    let g = grid(2048);
    let arma = ArmaModel::benchmark();
    let cases = [
        (TargetSpec::Arma(arma), BankSpec::CovarianceExtension { n: 6, m: 1 }),
        (TargetSpec::scalar_bandpass(), BankSpec::radius_08(&[0.4, 1.2, 2.0], 1)),
        (TargetSpec::bivariate_bandpass(), BankSpec::radius_08(&[0.4, 1.2, 2.0], 2)),
    ];
    for (target, spec) in cases {
        let omega = target.spectrum(g).unwrap();
        let bank = spec.build(g).unwrap();
        let sigma = bank.gamma_op(&omega).unwrap();
        let w = bank.whiten(&sigma).unwrap().bank;
        for nu in 1..=3 {
            let sol = DualProblem::new(&omega, &w, Family::Nu(nu)).unwrap().solve(&SPECTAPPROX_OPTIONS).unwrap();
            worst = worst.max(sol.phi.sup_distance(&omega).unwrap());
        }
    }
    verdict(worst <= 1e-6, format!("max sup-norm ‖Φ_ν - Ω‖ {worst:.1e} (bound 1e-6)"))
}

fn run_at(name: &str, k: usize) -> ExperimentOutcome {
    let mut config = ExperimentConfig::builtin(name).unwrap();
    config.grid = k;
    run_experiment(&config).unwrap()
}

fn c10_refinement(coarse: &[ExperimentOutcome]) -> Verdict {
    let mut worst_div: f64 = 0.0;
    let mut worst_mom: f64 = 0.0;
    for c in coarse {
        let fine = run_at(&c.config.name, 2 * c.config.grid);
        let bank_c = c.config.bank.build(grid(c.config.grid)).unwrap();
        let bank_f = fine.config.bank.build(grid(fine.config.grid)).unwrap();
        for (a, b) in c.runs.iter().zip(&fine.runs) {
            worst_div = worst_div.max(relative(a.report.divergence, b.report.divergence));
            let ma = bank_c.gamma_op(&a.phi).unwrap();
            let mb = bank_f.gamma_op(&b.phi).unwrap();
            worst_mom = worst_mom.max(ma.sub(&mb).norm() / mb.norm());
        }
    }
    verdict(
        worst_div <= 1e-7 && worst_mom <= 1e-7,
        format!("K 2048→4096 on all four scenarios: divergence {worst_div:.1e}, moments {worst_mom:.1e} (bound 1e-7)"),
    )
}

fn c11_pipeline(first: &ExperimentOutcome, elapsed: Duration) -> Verdict {
    let second = run_at("data-driven", first.config.grid);
    let identical = first.runs.iter().zip(&second.runs).all(|(a, b)| a.phi == b.phi && a.report == b.report);
    let mut residuals_ok = true;
    let bank = first.config.bank.build(grid(first.config.grid)).unwrap();
    let v = VOperator::new(&bank).unwrap();
    for run in &first.runs {
        let cov = run.covfit.as_ref().unwrap();
        residuals_ok &= cov.residual <= 1e-8 * run.sigma.norm();
        residuals_ok &= v.apply(&run.sigma).unwrap().norm() <= 1e-8 * run.sigma.norm();
        residuals_ok &= run.sigma.is_positive_definite();
        residuals_ok &= run.report.constraint_residual <= 1e-6;
        let w = bank.whiten(&run.sigma).unwrap().bank;
        let m = moment_of(&w, &run.phi);
        residuals_ok &= (m - DMatrix::identity(w.state_dim(), w.state_dim())).norm() <= 1e-6;
    }
    verdict(
        identical && residuals_ok && elapsed < Duration::from_secs(300),
        format!(
            "N=50, seed {}, ν 1..3: {:.1}s, repeat identical {identical}, residual bounds {residuals_ok}",
            first.config.seed,
            elapsed.as_secs_f64()
        ),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() {
    // Keep `cargo test -- --list` and filtered runs from doing the full work.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    let (arma, arma_time) = timed(|| run_at("arma", 2048));
    let scalar = run_at("scalar-bandpass", 2048);
    let bivariate = run_at("bivariate-bandpass", 2048);
    let (data, data_time) = timed(|| run_at("data-driven", 2048));

    let mut failures = Vec::new();
    let mut report = |id: usize, name: &str, v: Verdict| {
        let tag = if v.pass {
            "PASS"
        } else {
            failures.push(id);
            "FAIL"
        };
        println!("criterion {id:>2} [{tag}] {name}: {}", v.detail);
    };
    report(1, "divergence limits", c1_limits());
    report(2, "nonnegativity and identity", c2_nonnegativity());
    report(3, "gradient and Hessian", c3_derivatives());
    report(4, "moment matching", c4_moments(&arma, arma_time));
    report(5, "nu = 1 closed form", c5_nu_one());
    report(6, "KL limit", c6_kl_limit());
    report(7, "covariance fitting", c7_covfit());
    report(8, "peak reduction", c8_peaks(&arma));
    report(9, "feasible prior fixed point", c9_feasible_prior());
    report(10, "quadrature robustness", c10_refinement(&[arma.clone(), scalar, bivariate, data.clone()]));
    report(11, "end-to-end pipeline", c11_pipeline(&data, data_time));

    if failures.is_empty() {
        println!("acceptance: all criteria pass");
    } else {
        println!("acceptance: failing criteria {failures:?}");
        std::process::exit(1);
    }
}
