//! Simulation studies: ARMA and bandpass targets, priors, the known-covariance
//! comparison procedure and the data-driven estimation pipeline.
//!
//! Experiments run in `f64`.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::covfit::{matrix_rows, CovFitProblem, CovObjective, COVFIT_OPTIONS};
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::matfun::{Hermitian, HermitianMatrix, SymmetricMatrix};
use crate::newton::NewtonOptions;
use crate::spectapprox::{DualProblem, Family, SolverReport, SPECTAPPROX_OPTIONS};
use crate::spectra::{eval_poly, polynomial_roots, FrequencyGrid, RationalScalarFactor, SpectrumGrid, DEFAULT_GRID};

/// Grid used for "exact" state covariances computed by quadrature.
pub const EXACT_GRID: usize = 8192;

/// Number of one-sided taps of the FIR filters that simulate bandpass processes.
pub const FIR_TAPS: usize = 512;

/// `y(t) = Σ a_i y(t-i) + Σ b_j e(t-j)`, `e` white Gaussian with the given variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub variance: f64,
}

impl ArmaModel {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>, variance: f64) -> Result<Self> {
        if ma.is_empty() {
            return Err(Error::InvalidArgument("MA polynomial needs at least b_0".into()));
        }
        if !(variance > 0.0) {
            return Err(Error::NonPositiveInput(variance));
        }
        let model = Self { ar, ma, variance };
        let radius = model.ar_root_radius();
        if radius >= 1.0 {
            return Err(Error::UnstableModel { radius });
        }
        Ok(model)
    }

    /// The ARMA(6,4) benchmark (6 denominator and 4 numerator coefficients,
    /// orders 5 and 3) driven by unit-variance noise.
    pub fn benchmark() -> Self {
        Self::new(
            vec![0.5, -0.42, 0.602, -0.0425, 0.1192],
            vec![1.0, 1.1, 0.08, -0.15],
            1.0,
        )
        .expect("example model is stable")
    }

    /// Largest modulus of the roots of `z^p - a_1 z^{p-1} - ... - a_p`.
    pub fn ar_root_radius(&self) -> f64 {
        let p = self.ar.len();
        if p == 0 {
            return 0.0;
        }
        let mut coeffs: Vec<f64> = self.ar.iter().rev().map(|a| -a).collect();
        coeffs.push(1.0);
        polynomial_roots(&coeffs).iter().map(|r| r.norm()).fold(0.0, f64::max)
    }

    fn ar_order(&self) -> usize {
        self.ar.len()
    }

    fn ma_order(&self) -> usize {
        self.ma.len() - 1
    }

    /// `σ² |b(e^{-jθ})|² / |a(e^{-jθ})|²`.
    pub fn density(&self, theta: f64) -> f64 {
        let z = Complex::new(theta.cos(), -theta.sin());
        let b = eval_poly(&self.ma, z);
        let mut a_coeffs = vec![1.0];
        a_coeffs.extend(self.ar.iter().map(|a| -a));
        let a = eval_poly(&a_coeffs, z);
        self.variance * b.norm_sqr() / a.norm_sqr()
    }

    /// First `len` impulse-response coefficients.
    pub fn impulse_response(&self, len: usize) -> Vec<f64> {
        let mut h = vec![0.0; len];
        for t in 0..len {
            let mut v = self.ma.get(t).copied().unwrap_or(0.0);
            for (i, a) in self.ar.iter().enumerate() {
                if t > i {
                    v += a * h[t - i - 1];
                }
            }
            h[t] = v;
        }
        h
    }

    /// Controllable canonical realization `(F, g, h, d)` with
    /// `x(t+1) = F x(t) + g e(t)`, `y(t) = h x(t) + d e(t)`.
    pub fn realization(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let r = self.ar_order().max(self.ma_order());
        let a = |i: usize| self.ar.get(i - 1).copied().unwrap_or(0.0);
        let b = |i: usize| self.ma.get(i).copied().unwrap_or(0.0);
        let mut f = DMatrix::zeros(r, r);
        for j in 0..r {
            f[(0, j)] = a(j + 1);
        }
        for i in 1..r {
            f[(i, i - 1)] = 1.0;
        }
        let mut g = DVector::zeros(r);
        if r > 0 {
            g[0] = 1.0;
        }
        let h = DVector::from_iterator(r, (1..=r).map(|i| b(i) + b(0) * a(i)));
        (f, g, h, b(0))
    }

    /// Simulated path of length `n` after a burn-in of `10 (p + q)` samples.
    pub fn simulate(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let burn = 10 * (self.ar_order() + self.ma_order());
        let sd = self.variance.sqrt();
        let total = burn + n;
        let mut e = Vec::with_capacity(total);
        let mut y: Vec<f64> = Vec::with_capacity(total);
        for t in 0..total {
            let z: f64 = StandardNormal.sample(&mut rng);
            let et = sd * z;
            e.push(et);
            let mut v = 0.0;
            for (i, a) in self.ar.iter().enumerate() {
                if t > i {
                    v += a * y[t - i - 1];
                }
            }
            for (j, b) in self.ma.iter().enumerate() {
                if t >= j {
                    v += b * e[t - j];
                }
            }
            y.push(v);
        }
        y.split_off(burn)
    }

    /// Exact state covariance of `bank` driven by this process, from the
    /// discrete Lyapunov equation of the cascade (ARMA realization, bank).
    pub fn state_covariance(&self, bank: &FilterBank<f64>) -> Result<SymmetricMatrix<f64>> {
        if bank.input_dim() != 1 {
            return Err(Error::Dimension("ARMA process is scalar; bank must have one input".into()));
        }
        let (f, g, h, d) = self.realization();
        let r = f.nrows();
        let n = bank.state_dim();
        let mut big = DMatrix::zeros(r + n, r + n);
        big.view_mut((0, 0), (r, r)).copy_from(&f);
        let bh = bank.b() * h.transpose();
        big.view_mut((r, 0), (n, r)).copy_from(&bh);
        big.view_mut((r, r), (n, n)).copy_from(bank.a());
        let mut input = DVector::zeros(r + n);
        input.rows_mut(0, r).copy_from(&g);
        let bd = bank.b().column(0) * d;
        input.rows_mut(r, n).copy_from(&bd);
        let q = &input * input.transpose() * self.variance;
        let p = discrete_lyapunov(&big, &q)?;
        Ok(Hermitian::symmetrized(p.view((r, r), (n, n)).into_owned()))
    }
}

/// Solves `P = F P Fᵀ + Q`.
pub fn discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = f.nrows();
    let op = DMatrix::<f64>::identity(n * n, n * n) - f.kronecker(f);
    let rhs = DVector::from_column_slice(q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidArgument("Lyapunov operator is singular".into()))?;
    Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
}

/// Raised-cosine bandpass magnitude on `[0, π]`, mirrored to `[π, 2π)`.
pub fn bandpass_profile(theta: f64, low: f64, high: f64, width: f64, floor: f64, gain: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    let t = if t > PI { 2.0 * PI - t } else { t };
    let edge = |x: f64| {
        if x <= -width / 2.0 {
            0.0
        } else if x >= width / 2.0 {
            1.0
        } else {
            0.5 * (1.0 - (PI * (x + width / 2.0) / width).cos())
        }
    };
    floor + (gain - floor) * edge(t - low) * edge(high - t)
}

/// Target process of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TargetSpec {
    Arma(ArmaModel),
    /// Scalar bandpass with raised-cosine transitions.
    ScalarBandpass {
        low: f64,
        high: f64,
        width: f64,
        floor: f64,
    },
    /// `M diag(d_1, d_2) Mᵀ` with bandpass profiles `d_1` (unit gain) and
    /// `d_2` (gain `second_gain`), `M` a rotation by `mixing_angle`.
    BivariateBandpass {
        low: f64,
        high: f64,
        width: f64,
        floor: f64,
        second_gain: f64,
        mixing_angle: f64,
    },
}

impl TargetSpec {
    pub fn scalar_bandpass() -> Self {
        TargetSpec::ScalarBandpass {
            low: 0.89,
            high: 2.46,
            width: 0.2,
            floor: 2e-3,
        }
    }

    pub fn bivariate_bandpass() -> Self {
        TargetSpec::BivariateBandpass {
            low: 0.42,
            high: 1.94,
            width: 0.2,
            floor: 2e-3,
            second_gain: 0.5,
            mixing_angle: PI / 6.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::BivariateBandpass { .. } => 2,
            _ => 1,
        }
    }

    fn mixing(angle: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()])
    }

    /// Diagonal magnitude profile (before mixing) at `θ`.
    fn profile(&self, theta: f64) -> Vec<f64> {
        match *self {
            TargetSpec::Arma(ref m) => vec![m.density(theta)],
            TargetSpec::ScalarBandpass { low, high, width, floor } => {
                vec![bandpass_profile(theta, low, high, width, floor, 1.0)]
            }
            TargetSpec::BivariateBandpass {
                low,
                high,
                width,
                floor,
                second_gain,
                ..
            } => vec![
                bandpass_profile(theta, low, high, width, floor, 1.0),
                bandpass_profile(theta, low, high, width, floor, second_gain),
            ],
        }
    }

    /// `Ω(e^{jθ})`.
    pub fn eval(&self, theta: f64) -> DMatrix<Complex<f64>> {
        let d = self.profile(theta);
        match *self {
            TargetSpec::BivariateBandpass { mixing_angle, .. } => {
                let m = Self::mixing(mixing_angle);
                let omega = &m * DMatrix::from_diagonal(&DVector::from_vec(d)) * m.transpose();
                omega.map(|x| Complex::new(x, 0.0))
            }
            _ => DMatrix::from_element(1, 1, Complex::new(d[0], 0.0)),
        }
    }

    pub fn spectrum(&self, grid: FrequencyGrid) -> Result<SpectrumGrid<f64>> {
        SpectrumGrid::from_fn(grid, self.dim(), |t| self.eval(t))
    }

    /// `N` samples (columns) of the process.
    pub fn simulate(&self, n: usize, seed: u64) -> DMatrix<f64> {
        match self {
            TargetSpec::Arma(m) => DMatrix::from_row_slice(1, n, &m.simulate(n, seed)),
            _ => self.simulate_fir(n, seed),
        }
    }

    /// Zero-phase FIR shaping of white noise by `sqrt(d_i)`, then mixing.
    fn simulate_fir(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let dim = self.dim();
        let k = 4 * EXACT_GRID;
        let roots: Vec<Vec<f64>> = (0..k)
            .map(|j| self.profile(2.0 * PI * j as f64 / k as f64).iter().map(|d| d.sqrt()).collect())
            .collect();
        let taps: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                (0..=FIR_TAPS)
                    .map(|l| {
                        (0..k)
                            .map(|j| roots[j][i] * (2.0 * PI * ((l * j) % k) as f64 / k as f64).cos())
                            .sum::<f64>()
                            / k as f64
                    })
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = n + 2 * FIR_TAPS;
        let noise = DMatrix::<f64>::from_fn(dim, len, |_, _| StandardNormal.sample(&mut rng));
        let mut shaped = DMatrix::<f64>::zeros(dim, n);
        for i in 0..dim {
            for t in 0..n {
                let centre = t + FIR_TAPS;
                let mut v = taps[i][0] * noise[(i, centre)];
                for l in 1..=FIR_TAPS {
                    v += taps[i][l] * (noise[(i, centre - l)] + noise[(i, centre + l)]);
                }
                shaped[(i, t)] = v;
            }
        }
        match *self {
            TargetSpec::BivariateBandpass { mixing_angle, .. } => Self::mixing(mixing_angle) * shaped,
            _ => shaped,
        }
    }
}

/// Runs `x(t+1) = A x(t) + B y(t)` from `x = 0` and returns `(1/N) Σ x xᵀ`.
pub fn sample_state_covariance(bank: &FilterBank<f64>, y: &DMatrix<f64>) -> Result<SymmetricMatrix<f64>> {
    let n = bank.state_dim();
    if y.nrows() != bank.input_dim() {
        return Err(Error::Dimension(format!(
            "data has {} channels, bank has {} inputs",
            y.nrows(),
            bank.input_dim()
        )));
    }
    let len = y.ncols();
    if len < n {
        return Err(Error::TooFewSamples { len, needed: n });
    }
    let mut x = DVector::<f64>::zeros(n);
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for t in 0..len {
        x = bank.a() * &x + bank.b() * y.column(t);
        acc += &x * x.transpose();
    }
    Ok(Hermitian::symmetrized(acc / len as f64))
}

/// `(1/N) Σ y yᵀ`.
pub fn sample_covariance(y: &DMatrix<f64>) -> SymmetricMatrix<f64> {
    Hermitian::symmetrized(y * y.transpose() / y.ncols() as f64)
}

/// `Γ(Ω)` on a refined grid of at least [`EXACT_GRID`] points.
pub fn exact_state_covariance(bank: &FilterBank<f64>, target: &TargetSpec) -> Result<SymmetricMatrix<f64>> {
    if target.dim() != bank.input_dim() {
        return Err(Error::Dimension(format!(
            "target dimension {} does not match bank input dimension {}",
            target.dim(),
            bank.input_dim()
        )));
    }
    let grid = FrequencyGrid::new(EXACT_GRID.max(bank.grid().len()))?;
    let fine = FilterBank::new(bank.a().clone(), bank.b().clone(), grid)?;
    fine.gamma_op(&target.spectrum(grid)?)
}

/// Filter bank description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BankSpec {
    /// Delays `z^{-n}, ..., z^{-1}` on each of `m` channels.
    CovarianceExtension { n: usize, m: usize },
    /// Poles given by radius and angle; an angle strictly inside `(0, π)`
    /// stands for a conjugate pair.
    PoleBank {
        poles: Vec<PoleSpec>,
        #[serde(default = "one")]
        inputs: usize,
    },
    Explicit {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoleSpec {
    pub radius: f64,
    pub angle: f64,
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Parse("matrix rows have different lengths".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl BankSpec {
    pub fn build(&self, grid: FrequencyGrid) -> Result<FilterBank<f64>> {
        match self {
            BankSpec::CovarianceExtension { n, m } => FilterBank::covariance_extension(*n, *m, grid),
            BankSpec::PoleBank { poles, inputs } => {
                let mut list = Vec::new();
                for p in poles {
                    let z = Complex::from_polar(p.radius, p.angle);
                    let eps = 1e-12;
                    if p.angle.abs() < eps {
                        list.push(Complex::new(p.radius, 0.0));
                    } else if (p.angle.abs() - PI).abs() < eps {
                        list.push(Complex::new(-p.radius, 0.0));
                    } else {
                        list.push(Complex::new(z.re, z.im.abs()));
                        list.push(Complex::new(z.re, -z.im.abs()));
                    }
                }
                FilterBank::pole_bank(&list, *inputs, grid)
            }
            BankSpec::Explicit { a, b } => FilterBank::new(matrix_from_rows(a)?, matrix_from_rows(b)?, grid),
        }
    }

    /// One pole at zero, `±0.8`, and pairs `0.8 e^{±jω}` for the given angles.
    pub fn radius_08(angles: &[f64], inputs: usize) -> Self {
        let mut poles = vec![
            PoleSpec { radius: 0.0, angle: 0.0 },
            PoleSpec { radius: 0.8, angle: 0.0 },
            PoleSpec { radius: 0.8, angle: PI },
        ];
        poles.extend(angles.iter().map(|&angle| PoleSpec { radius: 0.8, angle }));
        BankSpec::PoleBank { poles, inputs }
    }
}

/// Prior spectral density description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PriorSpec {
    Identity,
    Constant { value: Vec<Vec<f64>> },
    /// `|W(e^{jθ})|^{2 power}` with `W = gain Π(z - zeros) / Π(z - poles)`;
    /// roots given as `[re, im]`.
    RationalPower {
        gain: f64,
        zeros: Vec<[f64; 2]>,
        poles: Vec<[f64; 2]>,
        power: i32,
    },
    /// Constant equal to the zeroth moment `∫Ω` of the target.
    TargetIntegral,
    /// The target spectrum itself.
    Target,
    /// Constant equal to the sample covariance of the data.
    DataVariance,
}

impl PriorSpec {
    /// `Ψ = |W_Ψ|^{12}`, `W_Ψ(z) = (5/6)(z + 0.6) / ((z - 0.4e^{j2.3})(z - 0.4e^{-j2.3}))`.
    pub fn bandpass_prior() -> Self {
        let p = Complex::from_polar(0.4, 2.3);
        PriorSpec::RationalPower {
            gain: 5.0 / 6.0,
            zeros: vec![[-0.6, 0.0]],
            poles: vec![[p.re, p.im], [p.re, -p.im]],
            power: 6,
        }
    }

    pub fn build(
        &self,
        grid: FrequencyGrid,
        dim: usize,
        target: Option<&TargetSpec>,
        data: Option<&DMatrix<f64>>,
    ) -> Result<SpectrumGrid<f64>> {
        match self {
            PriorSpec::Identity => Ok(SpectrumGrid::identity(grid, dim)),
            PriorSpec::Constant { value } => {
                SpectrumGrid::constant(grid, &SymmetricMatrix::new(matrix_from_rows(value)?)?.to_complex())
            }
            PriorSpec::RationalPower {
                gain,
                zeros,
                poles,
                power,
            } => {
                let c = |r: &[f64; 2]| Complex::new(r[0], r[1]);
                let zs: Vec<_> = zeros.iter().map(c).collect();
                let ps: Vec<_> = poles.iter().map(c).collect();
                RationalScalarFactor::from_roots(*gain, &zs, &ps, true)?.spectrum(grid, *power)
            }
            PriorSpec::TargetIntegral => {
                let t = target.ok_or_else(|| Error::InvalidArgument("prior needs a target".into()))?;
                let fine = FrequencyGrid::new(EXACT_GRID.max(grid.len()))?;
                let integral = t.spectrum(fine)?.integral();
                SpectrumGrid::constant(grid, &integral.to_complex())
            }
            PriorSpec::Target => target
                .ok_or_else(|| Error::InvalidArgument("prior needs a target".into()))?
                .spectrum(grid),
            PriorSpec::DataVariance => {
                let y = data.ok_or_else(|| Error::InvalidArgument("prior needs data".into()))?;
                SpectrumGrid::constant(grid, &sample_covariance(y).to_complex())
            }
        }
    }
}

/// How the state covariance is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The exact state covariance of the target (comparison procedure).
    KnownSigma,
    /// Simulate, estimate the sample state covariance, fit it by covariance
    /// fitting with the same `ν`, then approximate.
    DataDriven,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub target: TargetSpec,
    pub bank: BankSpec,
    pub prior: PriorSpec,
    pub nu: Vec<u32>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_options")]
    pub options: NewtonOptions,
    #[serde(default = "default_cov_options")]
    pub covfit_options: NewtonOptions,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_samples() -> usize {
    50
}

fn default_options() -> NewtonOptions {
    SPECTAPPROX_OPTIONS
}

fn default_cov_options() -> NewtonOptions {
    COVFIT_OPTIONS
}

pub const EXPERIMENTS: [&str; 4] = ["arma", "scalar-bandpass", "bivariate-bandpass", "data-driven"];

/// Default seed of the data-driven experiment.
pub const DEFAULT_SEED: u64 = 2010;

impl ExperimentConfig {
    /// The built-in experiments; `None` for an unknown name.
    pub fn builtin(name: &str) -> Option<Self> {
        let base = |mode, target, bank, prior| ExperimentConfig {
            name: name.to_string(),
            mode,
            target,
            bank,
            prior,
            nu: vec![1, 2, 3],
            grid: DEFAULT_GRID,
            seed: DEFAULT_SEED,
            samples: default_samples(),
            options: SPECTAPPROX_OPTIONS,
            covfit_options: COVFIT_OPTIONS,
        };
        let bivariate_bank = BankSpec::radius_08(&[0.4, 1.2, 2.0], 2);
        Some(match name {
            "arma" => base(
                Mode::KnownSigma,
                TargetSpec::Arma(ArmaModel::benchmark()),
                BankSpec::CovarianceExtension { n: 6, m: 1 },
                PriorSpec::TargetIntegral,
            ),
            "scalar-bandpass" => base(
                Mode::KnownSigma,
                TargetSpec::scalar_bandpass(),
                BankSpec::radius_08(&[PI / 4.0, PI / 2.0, 3.0 * PI / 4.0], 1),
                PriorSpec::bandpass_prior(),
            ),
            "bivariate-bandpass" => base(
                Mode::KnownSigma,
                TargetSpec::bivariate_bandpass(),
                bivariate_bank,
                PriorSpec::TargetIntegral,
            ),
            "data-driven" => base(
                Mode::DataDriven,
                TargetSpec::bivariate_bandpass(),
                bivariate_bank,
                PriorSpec::DataVariance,
            ),
            _ => return None,
        })
    }

    fn validate(&self) -> Result<FrequencyGrid> {
        if self.nu.is_empty() || self.nu.contains(&0) {
            return Err(Error::InvalidArgument("nu values must be positive integers".into()));
        }
        self.options.validate()?;
        self.covfit_options.validate()?;
        FrequencyGrid::new(self.grid)
    }
}

/// Summary of the covariance-fitting stage of a data-driven run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovFitSummary {
    pub residual: f64,
    pub divergence: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct NuOutcome {
    pub nu: u32,
    pub phi: SpectrumGrid<f64>,
    pub report: SolverReport,
    /// `max_θ λ_max(Φ_ν)` and where it is attained.
    pub peak: f64,
    pub peak_theta: f64,
    /// `max_θ ‖Φ_ν - Ω‖₂`.
    pub target_distance: f64,
    pub covfit: Option<CovFitSummary>,
    /// State covariance used for whitening.
    pub sigma: SymmetricMatrix<f64>,
}

impl NuOutcome {
    pub fn summary(&self) -> serde_json::Value {
        json!({
            "nu": self.nu,
            "divergence": self.report.divergence,
            "residual": self.report.constraint_residual,
            "peak": self.peak,
            "iterations": self.report.newton_iterations(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub omega: SpectrumGrid<f64>,
    pub psi: SpectrumGrid<f64>,
    pub runs: Vec<NuOutcome>,
}

impl ExperimentOutcome {
    pub fn summary(&self) -> serde_json::Value {
        serde_json::Value::Array(self.runs.iter().map(|r| r.summary()).collect())
    }

    /// Writes `phi_nu{ν}.csv`, `report_nu{ν}.json`, `omega.csv`, `psi.csv` and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.omega.write_csv(&dir.join("omega.csv"))?;
        self.psi.write_csv(&dir.join("psi.csv"))?;
        for r in &self.runs {
            r.phi.write_csv(&dir.join(format!("phi_nu{}.csv", r.nu)))?;
            let report = json!({
                "experiment": self.config.name,
                "nu": r.nu,
                "report": r.report,
                "peak": r.peak,
                "peak_theta": r.peak_theta,
                "target_distance": r.target_distance,
                "covfit": r.covfit,
                "sigma": matrix_rows(r.sigma.as_matrix()),
            });
            std::fs::write(
                dir.join(format!("report_nu{}.json", r.nu)),
                serde_json::to_string_pretty(&report)?,
            )?;
        }
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary())?)?;
        Ok(())
    }
}

/// Largest eigenvalue over the grid and its frequency.
pub fn peak(phi: &SpectrumGrid<f64>) -> (f64, f64) {
    phi.peak_profile()
        .iter()
        .enumerate()
        .fold((f64::MIN, 0.0), |(best, at), (k, &v)| {
            if v > best {
                (v, phi.grid().theta(k))
            } else {
                (best, at)
            }
        })
}

fn finish_run(
    nu: u32,
    psi: &SpectrumGrid<f64>,
    omega: &SpectrumGrid<f64>,
    bank: &FilterBank<f64>,
    sigma: SymmetricMatrix<f64>,
    options: &NewtonOptions,
    covfit: Option<CovFitSummary>,
) -> Result<NuOutcome> {
    let whitened = bank.whiten(&sigma)?;
    let solution = DualProblem::new(psi, &whitened.bank, Family::Nu(nu))?.solve(options)?;
    let (peak, peak_theta) = peak(&solution.phi);
    let target_distance = solution.phi.sup_distance(omega)?;
    Ok(NuOutcome {
        nu,
        phi: solution.phi,
        report: solution.report,
        peak,
        peak_theta,
        target_distance,
        covfit,
        sigma,
    })
}

/// Runs every `ν` of the configuration, concurrently.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    match config.mode {
        Mode::KnownSigma => run_known_sigma(config),
        Mode::DataDriven => run_data_driven(config),
    }
}

fn run_all(nus: &[u32], f: impl Fn(u32) -> Result<NuOutcome> + Sync) -> Result<Vec<NuOutcome>> {
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = nus.iter().map(|&nu| s.spawn(move || f(nu))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}

/// Comparison procedure with the exact state covariance `Σ = Γ(Ω)`.
pub fn run_known_sigma(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let grid = config.validate()?;
    let bank = config.bank.build(grid)?;
    let omega = config.target.spectrum(grid)?;
    let psi = config.prior.build(grid, config.target.dim(), Some(&config.target), None)?;
    let sigma = match &config.target {
        TargetSpec::Arma(model) => model.state_covariance(&bank)?,
        other => exact_state_covariance(&bank, other)?,
    };
    let runs = run_all(&config.nu, |nu| {
        finish_run(nu, &psi, &omega, &bank, sigma.clone(), &config.options, None)
    })?;
    Ok(ExperimentOutcome {
        config: config.clone(),
        omega,
        psi,
        runs,
    })
}

/// Estimation from `N` simulated samples: `Σ̂_C`, covariance fitting with the
/// same `ν`, whitening, spectrum approximation.
pub fn run_data_driven(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let grid = config.validate()?;
    let bank = config.bank.build(grid)?;
    let omega = config.target.spectrum(grid)?;
    let y = config.target.simulate(config.samples, config.seed);
    let psi = config.prior.build(grid, config.target.dim(), Some(&config.target), Some(&y))?;
    let sigma_hat = sample_state_covariance(&bank, &y)?;
    let runs = run_all(&config.nu, |nu| {
        let fit = CovFitProblem::new(&sigma_hat, &bank, CovObjective::Nu(nu))?.solve(&config.covfit_options)?;
        let summary = CovFitSummary {
            residual: fit.residual,
            divergence: fit.divergence,
            iterations: fit.iterations(),
        };
        finish_run(nu, &psi, &omega, &bank, fit.p, &config.options, Some(summary))
    })?;
    Ok(ExperimentOutcome {
        config: config.clone(),
        omega,
        psi,
        runs,
    })
}

/// `s_ν(φ, ψ)` and `s'_ν(φ, ψ) = d s_ν(x, ψ)/dx` at `x = φ`; `nu = None` is `ν = ∞`.
pub fn s_nu_diagnostic(phi: f64, psi: f64, nu: Option<u32>) -> Result<(f64, f64)> {
    for v in [phi, psi] {
        if !(v > 0.0) {
            return Err(Error::NonPositiveInput(v));
        }
    }
    Ok(match nu {
        None => (phi * (phi.ln() - psi.ln()) - phi + psi, phi.ln() - psi.ln()),
        Some(0) => return Err(Error::InvalidArgument("nu must be a positive integer".into())),
        Some(1) => (psi.ln() - phi.ln() + phi / psi - 1.0, 1.0 / psi - 1.0 / phi),
        Some(n) => {
            let nu = f64::from(n);
            let e = (nu - 1.0) / nu;
            let s = -nu * (phi.powf(e) - phi * psi.powf(-1.0 / nu)) - nu / (nu - 1.0) * (phi.powf(e) - psi.powf(e));
            (s, nu * (psi.powf(-1.0 / nu) - phi.powf(-1.0 / nu)))
        }
    })
}

/// Result of fitting a rational model to a scalar solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub nu: u32,
    /// `ν (deg[Ψ^{1/ν}] + 2n)` with `deg[Ψ^{1/ν}] = 0` for constant priors.
    pub bound: usize,
    /// McMillan degree of the fitted model `(|d|² / p)^ν`.
    pub fitted_degree: usize,
    pub sup_error: f64,
    pub relative_error: f64,
}

/// For a scalar solution with constant prior, fits `Φ^{-1/ν} |d(e^{jθ})|²` by a
/// cosine polynomial of degree `n` (`d` the characteristic polynomial of `A`),
/// rebuilds `Φ` from the fit and reports the sup-norm error.
pub fn degree_report(phi: &SpectrumGrid<f64>, bank: &FilterBank<f64>, nu: u32) -> Result<DegreeReport> {
    if phi.dim() != 1 {
        return Err(Error::Dimension("degree report needs a scalar spectrum".into()));
    }
    let n = bank.state_dim();
    let eig: Vec<Complex<f64>> = bank.a().complex_eigenvalues().iter().copied().collect();
    let grid = *phi.grid();
    let nu_f = f64::from(nu);
    let half = grid.half_len();
    let denom = |t: f64| {
        let z = Complex::new(t.cos(), t.sin());
        eig.iter().map(|l| (z - l).norm_sqr()).product::<f64>()
    };
    let values: Vec<f64> = phi.half().iter().map(|v| v.as_matrix()[(0, 0)].re).collect();
    let design = DMatrix::from_fn(half, n + 1, |k, l| (l as f64 * grid.theta::<f64>(k)).cos());
    let rhs = DVector::from_iterator(
        half,
        (0..half).map(|k| values[k].powf(-1.0 / nu_f) * denom(grid.theta(k))),
    );
    let coeffs = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let fitted = &design * coeffs;
    let mut sup: f64 = 0.0;
    for k in 0..half {
        let p = fitted[k] / denom(grid.theta(k));
        let rebuilt = if p > 0.0 { p.powf(-nu_f) } else { f64::INFINITY };
        sup = sup.max((rebuilt - values[k]).abs());
    }
    let scale = values.iter().copied().fold(0.0, f64::max);
    Ok(DegreeReport {
        nu,
        bound: nu as usize * 2 * n,
        fitted_degree: nu as usize * 2 * n,
        sup_error: sup,
        relative_error: sup / scale,
    })
}

/// `HermitianMatrix` helper for constants.
pub fn constant_hermitian(m: &DMatrix<f64>) -> Result<HermitianMatrix<f64>> {
    Ok(SymmetricMatrix::new(m.clone())?.to_complex())
}
