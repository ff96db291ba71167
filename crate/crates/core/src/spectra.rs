//! Spectral densities sampled on a uniform grid of the unit circle, and the
//! Beta divergence family between them.
//!
//! Spectra of real processes satisfy `Φ(e^{-jθ}) = conj Φ(e^{jθ})`. Values are
//! computed on `θ ∈ [0, π]` and mirrored, and integrals of such real-symmetric
//! integrands are taken over the half grid with doubled interior weights.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{Hermitian, HermitianMatrix, SymmetricMatrix};
use crate::scalar::Real;

/// Default number of frequency points.
pub const DEFAULT_GRID: usize = 2048;

/// Relative tolerance of the real-process symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// |β| or |β - 1| below this uses the exact limit formula.
pub const BETA_LIMIT_GAP: f64 = 1e-8;

/// `K` uniform points `θ_k = 2πk/K` on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrequencyGrid {
    len: usize,
}

impl FrequencyGrid {
    /// `len` must be a power of two, at least 64.
    pub fn new(len: usize) -> Result<Self> {
        if len < 64 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size must be a power of two >= 64, got {len}"
            )));
        }
        Ok(Self { len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of points on `[0, π]`.
    pub fn half_len(&self) -> usize {
        self.len / 2 + 1
    }

    pub fn theta<T: Real>(&self, k: usize) -> T {
        T::lit(2.0 * PI * k as f64 / self.len as f64)
    }

    /// Quadrature weight of half-grid point `k` for a real-symmetric integrand.
    pub fn half_weight<T: Real>(&self, k: usize) -> T {
        let w = if k == 0 || k == self.len / 2 { 1.0 } else { 2.0 };
        T::lit(w / self.len as f64)
    }

    /// Doubles the number of points.
    pub fn refined(&self) -> Self {
        Self { len: self.len * 2 }
    }
}

/// `(1/K) Σ_k F(θ_k)`: normalized-measure integral of a sampled matrix function.
pub fn integrate<T: Real>(values: &[DMatrix<Complex<T>>]) -> DMatrix<Complex<T>> {
    assert!(!values.is_empty(), "cannot integrate over an empty grid");
    let (r, c) = values[0].shape();
    let mut acc = DMatrix::zeros(r, c);
    for v in values {
        acc += v;
    }
    acc.unscale(T::from_usize_lossy(values.len()))
}

/// Integral of a real-symmetric scalar integrand given on the half grid.
pub fn integrate_half<T: Real>(grid: &FrequencyGrid, f: impl Fn(usize) -> T) -> T {
    (0..grid.half_len()).fold(T::zero(), |acc, k| acc + grid.half_weight::<T>(k) * f(k))
}

/// An `m × m` Hermitian positive definite spectral density on a [`FrequencyGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumGrid<T: Real> {
    grid: FrequencyGrid,
    dim: usize,
    values: Vec<HermitianMatrix<T>>,
}

impl<T: Real> SpectrumGrid<T> {
    /// Samples `f(θ)` on `[0, π]` and mirrors to the full circle.
    pub fn from_fn(grid: FrequencyGrid, dim: usize, f: impl Fn(T) -> DMatrix<Complex<T>>) -> Result<Self> {
        let half = (0..grid.half_len())
            .map(|k| HermitianMatrix::new(f(grid.theta(k))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_half(grid, dim, half)
    }

    /// Scalar spectrum from a positive function of `θ`.
    pub fn scalar_from_fn(grid: FrequencyGrid, f: impl Fn(T) -> T) -> Result<Self> {
        Self::from_fn(grid, 1, |t| DMatrix::from_element(1, 1, Complex::new(f(t), T::zero())))
    }

    pub fn constant(grid: FrequencyGrid, value: &HermitianMatrix<T>) -> Result<Self> {
        Self::from_half(grid, value.dim(), vec![value.clone(); grid.half_len()])
    }

    pub fn identity(grid: FrequencyGrid, dim: usize) -> Self {
        Self::constant(grid, &HermitianMatrix::identity(dim)).expect("identity is positive definite")
    }

    /// Builds from the values on `[0, π]`; endpoints are projected onto real matrices.
    pub(crate) fn from_half(grid: FrequencyGrid, dim: usize, mut half: Vec<HermitianMatrix<T>>) -> Result<Self> {
        if half.len() != grid.half_len() {
            return Err(Error::GridMismatch(format!(
                "expected {} half-grid values, got {}",
                grid.half_len(),
                half.len()
            )));
        }
        if let Some(bad) = half.iter().position(|v| v.dim() != dim) {
            return Err(Error::Dimension(format!(
                "value {bad} has size {}, expected {dim}",
                half[bad].dim()
            )));
        }
        let last = grid.len() / 2;
        for k in [0, last] {
            half[k] = half[k].real_part().to_complex();
        }
        for (k, v) in half.iter().enumerate() {
            let dec = v.eigh();
            dec.check_positive_definite().map_err(|_| Error::NotPositiveDefinite {
                min_eigenvalue: dec.min().as_f64(),
                index: Some(k),
            })?;
        }
        let mut values = half;
        for k in (last + 1)..grid.len() {
            let v = values[grid.len() - k].conj();
            values.push(v);
        }
        Ok(Self { grid, dim, values })
    }

    /// Validates a full set of `K` values: real-process symmetry and positivity.
    pub fn from_values(grid: FrequencyGrid, values: Vec<HermitianMatrix<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let dim = values[0].dim();
        if let Some(bad) = values.iter().position(|v| v.dim() != dim) {
            return Err(Error::Dimension(format!(
                "value {bad} has size {}, expected {dim}",
                values[bad].dim()
            )));
        }
        let scale = values.iter().map(|v| v.norm()).fold(T::zero(), |a, b| a.max(b));
        for k in 0..grid.len() {
            let mirror = (grid.len() - k) % grid.len();
            let gap = (values[k].as_matrix() - values[mirror].conj().as_matrix()).norm();
            if gap > T::lit(SYMMETRY_TOL) * scale {
                return Err(Error::InvalidArgument(format!(
                    "value at grid index {k} violates real-process symmetry (gap {gap:e})"
                )));
            }
        }
        for (k, v) in values.iter().enumerate() {
            let dec = v.eigh();
            dec.check_positive_definite().map_err(|_| Error::NotPositiveDefinite {
                min_eigenvalue: dec.min().as_f64(),
                index: Some(k),
            })?;
        }
        Ok(Self { grid, dim, values })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[HermitianMatrix<T>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &HermitianMatrix<T> {
        &self.values[k]
    }

    /// Values on `θ ∈ [0, π]`.
    pub fn half(&self) -> &[HermitianMatrix<T>] {
        &self.values[..self.grid.half_len()]
    }

    /// `μ₂`: smallest eigenvalue over the grid.
    pub fn min_eigenvalue(&self) -> T {
        self.half().iter().map(|v| v.min_eigenvalue()).fold(T::max_value().unwrap(), |a, b| a.min(b))
    }

    /// `μ₁`: largest eigenvalue over the grid.
    pub fn max_eigenvalue(&self) -> T {
        self.half().iter().map(|v| v.max_eigenvalue()).fold(T::min_value().unwrap(), |a, b| a.max(b))
    }

    /// Largest eigenvalue at each half-grid point.
    pub fn peak_profile(&self) -> Vec<T> {
        self.half().iter().map(|v| v.max_eigenvalue()).collect()
    }

    /// `max_θ ‖Φ(θ) - Ψ(θ)‖₂`.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        check_compatible(self, other)?;
        Ok(self
            .half()
            .iter()
            .zip(other.half())
            .map(|(a, b)| {
                let dec = a.sub(b).eigh();
                dec.max().abs().max(dec.min().abs())
            })
            .fold(T::zero(), |a, b| a.max(b)))
    }

    /// `∫Φ`, real symmetric for a real process.
    pub fn integral(&self) -> SymmetricMatrix<T> {
        let mut acc = DMatrix::<T>::zeros(self.dim, self.dim);
        for (k, v) in self.half().iter().enumerate() {
            acc += v.as_matrix().map(|z| z.re) * self.grid.half_weight::<T>(k);
        }
        Hermitian::symmetrized(acc)
    }

    /// Applies `f` at each point of `[0, π]`.
    pub fn map(&self, f: impl Fn(usize, &HermitianMatrix<T>) -> Result<HermitianMatrix<T>>) -> Result<Self> {
        let half = self
            .half()
            .iter()
            .enumerate()
            .map(|(k, v)| f(k, v))
            .collect::<Result<Vec<_>>>()?;
        Self::from_half(self.grid, self.dim, half)
    }

    /// Resamples onto another grid by evaluating the defining function again is
    /// not possible for sampled data; this only checks grids agree.
    pub fn same_grid(&self, other: &Self) -> bool {
        self.grid == other.grid && self.dim == other.dim
    }
}

pub fn check_compatible<T: Real>(a: &SpectrumGrid<T>, b: &SpectrumGrid<T>) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "grid sizes differ: {} vs {}",
            a.grid.len(),
            b.grid.len()
        )));
    }
    if a.dim != b.dim {
        return Err(Error::GridMismatch(format!("spectrum dimensions differ: {} vs {}", a.dim, b.dim)));
    }
    Ok(())
}

/// `Φ^c`, pointwise.
pub fn spectrum_power<T: Real>(phi: &SpectrumGrid<T>, c: T) -> Result<SpectrumGrid<T>> {
    phi.map(|k, v| {
        crate::matfun::herm_power(v, c).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::NotPositiveDefinite {
                min_eigenvalue,
                index: Some(k),
            },
            other => other,
        })
    })
}

/// Multivariate Beta divergence `S_β(Φ‖Ψ)`; dispatches to the Itakura-Saito
/// and Kullback-Leibler limits near `β = 0` and `β = 1`.
pub fn beta_divergence<T: Real>(phi: &SpectrumGrid<T>, psi: &SpectrumGrid<T>, beta: T) -> Result<T> {
    check_compatible(phi, psi)?;
    if beta.abs() < T::lit(BETA_LIMIT_GAP) {
        return is_divergence(phi, psi);
    }
    if (beta - T::one()).abs() < T::lit(BETA_LIMIT_GAP) {
        return kl_divergence(phi, psi);
    }
    let one = T::one();
    let terms: Vec<T> = phi
        .half()
        .iter()
        .zip(psi.half())
        .map(|(p, q)| {
            let dp = p.eigh();
            let dq = q.eigh();
            let tr_p_beta = dp.d.iter().fold(T::zero(), |a, &d| a + d.powf(beta));
            let tr_q_beta = dq.d.iter().fold(T::zero(), |a, &d| a + d.powf(beta));
            let q_beta_minus_one = dq.apply(|d| d.powf(beta - one));
            let cross = p.inner(&q_beta_minus_one);
            (tr_p_beta - cross) / (beta - one) - (tr_p_beta - tr_q_beta) / beta
        })
        .collect();
    Ok(integrate_half(phi.grid(), |k| terms[k]))
}

/// `S_KL(Φ‖Ψ) = ∫ tr[Φ(log Φ - log Ψ) - Φ + Ψ]`.
pub fn kl_divergence<T: Real>(phi: &SpectrumGrid<T>, psi: &SpectrumGrid<T>) -> Result<T> {
    check_compatible(phi, psi)?;
    let terms: Vec<T> = phi
        .half()
        .iter()
        .zip(psi.half())
        .map(|(p, q)| {
            let dp = p.eigh();
            let dq = q.eigh();
            let p_log_p = dp.d.iter().fold(T::zero(), |a, &d| a + d * d.ln());
            let log_q = dq.apply(|d| d.ln());
            p_log_p - p.inner(&log_q) - p.trace() + q.trace()
        })
        .collect();
    Ok(integrate_half(phi.grid(), |k| terms[k]))
}

/// `S_KL0(Φ‖Ψ) = ∫ tr[Φ(log Φ - log Ψ)]`, for spectra with equal zeroth-moment trace.
pub fn kl0_divergence<T: Real>(phi: &SpectrumGrid<T>, psi: &SpectrumGrid<T>) -> Result<T> {
    check_compatible(phi, psi)?;
    let terms: Vec<T> = phi
        .half()
        .iter()
        .zip(psi.half())
        .map(|(p, q)| {
            let dp = p.eigh();
            let p_log_p = dp.d.iter().fold(T::zero(), |a, &d| a + d * d.ln());
            let log_q = q.eigh().apply(|d| d.ln());
            p_log_p - p.inner(&log_q)
        })
        .collect();
    Ok(integrate_half(phi.grid(), |k| terms[k]))
}

/// `S_IS(Φ‖Ψ) = ∫ tr[log Ψ - log Φ + ΦΨ^{-1} - I]`.
pub fn is_divergence<T: Real>(phi: &SpectrumGrid<T>, psi: &SpectrumGrid<T>) -> Result<T> {
    check_compatible(phi, psi)?;
    let m = T::from_usize_lossy(phi.dim());
    let terms: Vec<T> = phi
        .half()
        .iter()
        .zip(psi.half())
        .map(|(p, q)| {
            let dp = p.eigh();
            let dq = q.eigh();
            let log_det_p = dp.d.iter().fold(T::zero(), |a, &d| a + d.ln());
            let log_det_q = dq.d.iter().fold(T::zero(), |a, &d| a + d.ln());
            let q_inv = dq.apply(|d| d.recip());
            log_det_q - log_det_p + p.inner(&q_inv) - m
        })
        .collect();
    Ok(integrate_half(phi.grid(), |k| terms[k]))
}

/// `β = 1 - 1/ν` for the integer family index `ν ≥ 1`.
pub fn beta_of_nu<T: Real>(nu: u32) -> T {
    T::one() - T::one() / T::lit(f64::from(nu))
}

/// `S_ν(Φ‖Ψ) = S_β(Φ‖Ψ)` with `β = 1 - 1/ν`.
pub fn nu_divergence<T: Real>(phi: &SpectrumGrid<T>, psi: &SpectrumGrid<T>, nu: u32) -> Result<T> {
    match nu {
        0 => Err(Error::InvalidArgument("nu must be a positive integer".into())),
        1 => is_divergence(phi, psi),
        _ => beta_divergence(phi, psi, beta_of_nu(nu)),
    }
}

/// Real-coefficient rational function `W(z) = num(z) / den(z)`, coefficients
/// in ascending powers of `z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalScalarFactor<T> {
    pub numerator: Vec<T>,
    pub denominator: Vec<T>,
    pub outer: bool,
}

impl<T: Real> RationalScalarFactor<T> {
    pub fn new(numerator: Vec<T>, denominator: Vec<T>, outer: bool) -> Result<Self> {
        if numerator.is_empty() || denominator.iter().all(|c| *c == T::zero()) {
            return Err(Error::InvalidArgument("empty numerator or zero denominator".into()));
        }
        if outer {
            let radius = polynomial_roots(&denominator)
                .iter()
                .map(|r| r.modulus())
                .fold(T::zero(), |a, b| a.max(b));
            if radius >= T::one() {
                return Err(Error::UnstableModel { radius: radius.as_f64() });
            }
        }
        Ok(Self {
            numerator,
            denominator,
            outer,
        })
    }

    /// `gain · Π(z - zeros) / Π(z - poles)`; complex roots must come in conjugate pairs.
    pub fn from_roots(gain: T, zeros: &[Complex<T>], poles: &[Complex<T>], outer: bool) -> Result<Self> {
        let num: Vec<T> = real_poly_from_roots(zeros)?.into_iter().map(|c| c * gain).collect();
        let den = real_poly_from_roots(poles)?;
        Self::new(num, den, outer)
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        eval_poly(&self.numerator, z) / eval_poly(&self.denominator, z)
    }

    /// `|W(e^{jθ})|^{2p}` sampled on the grid.
    pub fn spectrum(&self, grid: FrequencyGrid, power: i32) -> Result<SpectrumGrid<T>> {
        SpectrumGrid::scalar_from_fn(grid, |t: T| {
            let w = self.eval(Complex::new(t.cos(), t.sin()));
            w.norm_sqr().powi(power)
        })
    }
}

pub(crate) fn eval_poly<T: Real>(coeffs: &[T], z: Complex<T>) -> Complex<T> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * z + Complex::new(c, T::zero()))
}

fn real_poly_from_roots<T: Real>(roots: &[Complex<T>]) -> Result<Vec<T>> {
    let mut poly = vec![Complex::new(T::one(), T::zero())];
    for &r in roots {
        let mut next = vec![Complex::new(T::zero(), T::zero()); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        poly = next;
    }
    let scale = poly.iter().map(|c| c.modulus()).fold(T::zero(), |a, b| a.max(b));
    if poly.iter().any(|c| c.im.abs() > T::lit(1e-12) * scale) {
        return Err(Error::InvalidArgument(
            "complex roots must come in conjugate pairs".into(),
        ));
    }
    Ok(poly.into_iter().map(|c| c.re).collect())
}

/// Roots of `Σ c_i z^i` via companion-matrix eigenvalues.
pub(crate) fn polynomial_roots<T: Real>(coeffs: &[T]) -> Vec<Complex<T>> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == T::zero() {
        c.pop();
    }
    let degree = c.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = c[degree];
    let mut companion = DMatrix::<T>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = T::one();
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -c[i] / lead;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    dim: usize,
    theta: Vec<f64>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl<T: Real> SpectrumGrid<T> {
    fn csv_header(&self) -> String {
        let mut h = String::from("theta");
        for part in ["re", "im"] {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let _ = write!(h, ",{part}_{i}_{j}");
                }
            }
        }
        h
    }

    /// CSV: `theta`, then `m²` real parts and `m²` imaginary parts (row-major),
    /// one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            let _ = write!(out, "{}", self.grid.theta::<T>(k));
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let _ = write!(out, ",{}", v.as_matrix()[(i, j)].re);
                }
            }
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let _ = write!(out, ",{}", v.as_matrix()[(i, j)].im);
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty spectrum file".into()))?;
        let cols = header.split(',').count();
        if cols < 3 || (cols - 1) % 2 != 0 {
            return Err(Error::Parse(format!("unexpected column count {cols}")));
        }
        let dim = ((cols - 1) / 2) as f64;
        let dim = dim.sqrt().round() as usize;
        if dim * dim * 2 + 1 != cols {
            return Err(Error::Parse(format!("column count {cols} is not 1 + 2m^2")));
        }
        let mut thetas = Vec::new();
        let mut rows = Vec::new();
        for (r, line) in lines.enumerate() {
            let fields = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("row {r}: {e}")))?;
            if fields.len() != cols {
                return Err(Error::Parse(format!("row {r}: expected {cols} fields, got {}", fields.len())));
            }
            thetas.push(fields[0]);
            rows.push(fields[1..].to_vec());
        }
        let re: Vec<Vec<f64>> = rows.iter().map(|r| r[..dim * dim].to_vec()).collect();
        let im: Vec<Vec<f64>> = rows.iter().map(|r| r[dim * dim..].to_vec()).collect();
        Self::from_parts(dim, &thetas, &re, &im)
    }

    fn from_parts(dim: usize, theta: &[f64], re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let grid = FrequencyGrid::new(theta.len()).map_err(|_| {
            Error::GridMismatch(format!("{} rows is not a valid grid size", theta.len()))
        })?;
        for (k, &t) in theta.iter().enumerate() {
            let expected = 2.0 * PI * k as f64 / theta.len() as f64;
            if (t - expected).abs() > 1e-9 {
                return Err(Error::GridMismatch(format!(
                    "theta at row {k} is {t}, expected {expected}"
                )));
            }
        }
        let mut values = Vec::with_capacity(theta.len());
        for k in 0..theta.len() {
            if re[k].len() != dim * dim || im[k].len() != dim * dim {
                return Err(Error::Parse(format!("row {k}: expected {} entries", dim * dim)));
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| {
                Complex::new(T::lit(re[k][i * dim + j]), T::lit(im[k][i * dim + j]))
            });
            let gap = (&m - m.adjoint()).norm();
            if gap > T::lit(SYMMETRY_TOL) * m.norm().max(T::one()) {
                return Err(Error::Parse(format!("value at grid index {k} is not Hermitian")));
            }
            values.push(HermitianMatrix::new(m)?);
        }
        Self::from_values(grid, values)
    }

    pub fn to_json(&self) -> String {
        let n2 = self.dim * self.dim;
        let mut re = Vec::with_capacity(self.values.len());
        let mut im = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let mut r = Vec::with_capacity(n2);
            let mut i_ = Vec::with_capacity(n2);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    r.push(v.as_matrix()[(i, j)].re.as_f64());
                    i_.push(v.as_matrix()[(i, j)].im.as_f64());
                }
            }
            re.push(r);
            im.push(i_);
        }
        let doc = SpectrumJson {
            dim: self.dim,
            theta: (0..self.grid.len()).map(|k| self.grid.theta::<f64>(k)).collect(),
            re,
            im,
        };
        serde_json::to_string(&doc).expect("spectrum serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpectrumJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if doc.re.len() != doc.theta.len() || doc.im.len() != doc.theta.len() {
            return Err(Error::Parse("theta, re and im lengths differ".into()));
        }
        Self::from_parts(doc.dim, &doc.theta, &doc.re, &doc.im)
    }

    /// Reads CSV, or JSON when the file extension is `.json`.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}
