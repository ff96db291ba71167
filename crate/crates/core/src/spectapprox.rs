//! Spectrum approximation: the spectral density closest to a prior `Ψ` in the
//! divergence `S_ν` whose filter-bank state covariance equals the identity.
//!
//! The optimum has the form `Φ_ν(Λ) = (Ψ^{-1/ν} + G*ΛG/ν)^{-ν}` and the
//! multiplier `Λ ∈ Range Γ` minimizes the convex dual
//!
//! * `J_ν(Λ) = ν/(ν-1) ∫ tr[(Ψ^{-1/ν} + G*ΛG/ν)^{1-ν}] + tr Λ` for `ν ≥ 2`,
//! * `J_1(Λ) = -∫ log det(Ψ^{-1} + G*ΛG) + tr Λ`,
//! * `J_KL(Λ) = ∫ tr exp(log Ψ - G*ΛG) + tr Λ` in the `ν → ∞` limit.
//!
//! All three share the gradient `tr δΛ - ∫ tr[Φ(Λ) G*δΛG]`. The dual is
//! minimized by damped Newton in coordinates of an orthonormal basis of Range Γ.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::covfit::{matrix_rows, solve_newton_system};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, RangeGammaBasis, RANGE_TOL};
use crate::matfun::{
    exp_divided_difference, power_divided_difference, Hermitian, HermitianMatrix, SpectralDecomposition,
    SymmetricMatrix,
};
use crate::newton::{damped_newton, EvaluatedPoint, IterationRecord, NewtonObjective, NewtonOptions};
use crate::scalar::Real;
use crate::spectra::{integrate_half, kl_divergence, nu_divergence, SpectrumGrid};

/// Defaults for the spectral dual.
pub const SPECTAPPROX_OPTIONS: NewtonOptions = NewtonOptions {
    tolerance: 1e-9,
    alpha: 0.25,
    max_iterations: 100,
    max_halvings: 60,
};

/// Member of the divergence family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Nu(u32),
    KullbackLeibler,
}

impl Family {
    fn check(self) -> Result<Self> {
        if self == Family::Nu(0) {
            return Err(Error::InvalidArgument("nu must be a positive integer".into()));
        }
        Ok(self)
    }
}

/// A dual variable `Λ ∈ Range Γ` with its basis coordinates.
#[derive(Clone, Debug)]
pub struct Multiplier<T: Real> {
    pub lambda: SymmetricMatrix<T>,
    pub coordinates: DVector<T>,
    /// Smallest eigenvalue of `Ψ^{-1/ν} + G*ΛG/ν` over the grid (for KL: of `Φ_KL`).
    pub margin: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// `None` for the Kullback-Leibler member.
    pub nu: Option<u32>,
    /// Starting multiplier: `"identity"`, or `"zero"` when `Ψ` already meets the constraint.
    pub start: String,
    pub iterations: Vec<IterationRecord>,
    pub lambda: Vec<Vec<f64>>,
    /// `‖∫ G Φ G* - I‖_F` in whitened coordinates.
    pub constraint_residual: f64,
    /// `S_ν(Φ‖Ψ)`.
    pub divergence: f64,
    pub gradient_norm: f64,
}

impl SolverReport {
    pub fn newton_iterations(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T: Real> {
    pub phi: SpectrumGrid<T>,
    pub multiplier: Multiplier<T>,
    pub report: SolverReport,
}

/// The dual problem for fixed prior, bank and family member.
#[derive(Clone, Debug)]
pub struct DualProblem<T: Real> {
    psi: SpectrumGrid<T>,
    bank: FilterBank<T>,
    family: Family,
    /// `Ψ^{-1/ν}` or `log Ψ` on the half grid.
    base: Vec<HermitianMatrix<T>>,
    basis: RangeGammaBasis<T>,
    /// `G* Σ_i G` for each basis element, on the half grid, scaled by `1/ν` (by `-1` for KL).
    directions: Vec<Vec<HermitianMatrix<T>>>,
    basis_traces: DVector<T>,
}

/// Cached evaluation at an admissible multiplier.
pub struct DualPoint<T: Real> {
    value: T,
    margin: T,
    /// Eigen-decomposition of the inner matrix at each half-grid point.
    decs: Vec<SpectralDecomposition<Complex<T>>>,
    /// `Φ(Λ)` at each half-grid point.
    phi: Vec<HermitianMatrix<T>>,
}

impl<T: Real> EvaluatedPoint<T> for DualPoint<T> {
    fn value(&self) -> T {
        self.value
    }
    fn margin(&self) -> T {
        self.margin
    }
}

impl<T: Real> DualPoint<T> {
    pub fn phi_half(&self) -> &[HermitianMatrix<T>] {
        &self.phi
    }
}

impl<T: Real> DualProblem<T> {
    pub fn new(psi: &SpectrumGrid<T>, bank: &FilterBank<T>, family: Family) -> Result<Self> {
        let family = family.check()?;
        if psi.grid() != bank.grid() {
            return Err(Error::GridMismatch(format!(
                "prior has {} points, filter bank {}",
                psi.grid().len(),
                bank.grid().len()
            )));
        }
        if psi.dim() != bank.input_dim() {
            return Err(Error::GridMismatch(format!(
                "prior dimension {} does not match input dimension {}",
                psi.dim(),
                bank.input_dim()
            )));
        }
        let base = match family {
            Family::Nu(nu) => {
                let c = -T::lit(f64::from(nu)).recip();
                psi.half().iter().map(|v| v.eigh().apply(|d| d.powf(c))).collect()
            }
            Family::KullbackLeibler => psi.half().iter().map(|v| v.eigh().apply(|d| d.ln())).collect(),
        };
        let basis = bank.range_gamma_basis()?;
        let scale = direction_scale::<T>(family);
        let directions = basis
            .basis()
            .iter()
            .map(|e| {
                bank.gamma_adjoint(e)
                    .map(|vals| vals.into_iter().map(|v| v.scale(scale)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let basis_traces = DVector::from_iterator(basis.len(), basis.basis().iter().map(|e| e.trace()));
        Ok(Self {
            psi: psi.clone(),
            bank: bank.clone(),
            family,
            base,
            basis,
            directions,
            basis_traces,
        })
    }

    pub fn basis(&self) -> &RangeGammaBasis<T> {
        &self.basis
    }

    pub fn bank(&self) -> &FilterBank<T> {
        &self.bank
    }

    pub fn prior(&self) -> &SpectrumGrid<T> {
        &self.psi
    }

    pub fn family(&self) -> Family {
        self.family
    }

    fn nu_t(&self) -> T {
        match self.family {
            Family::Nu(nu) => T::lit(f64::from(nu)),
            Family::KullbackLeibler => T::one(),
        }
    }

    /// Evaluates at an arbitrary symmetric `Λ` (not necessarily in Range Γ).
    pub fn evaluate_matrix(&self, lambda: &SymmetricMatrix<T>) -> Result<Option<DualPoint<T>>> {
        let scale = direction_scale::<T>(self.family);
        let adj = self.bank.gamma_adjoint(lambda)?;
        let inner: Vec<HermitianMatrix<T>> = self
            .base
            .iter()
            .zip(&adj)
            .map(|(b, s)| b.add(&s.scale(scale)))
            .collect();
        Ok(self.point_from_inner(inner, lambda.trace()))
    }

    fn point_from_inner(&self, inner: Vec<HermitianMatrix<T>>, trace_lambda: T) -> Option<DualPoint<T>> {
        let grid = *self.psi.grid();
        let mut decs = Vec::with_capacity(inner.len());
        let mut phi = Vec::with_capacity(inner.len());
        let mut terms = Vec::with_capacity(inner.len());
        let mut margin = T::max_value().unwrap();
        let nu_t = self.nu_t();
        for r in &inner {
            let dec = r.eigh();
            match self.family {
                Family::Nu(nu) => {
                    if dec.check_positive_definite().is_err() {
                        return None;
                    }
                    margin = margin.min(dec.min());
                    terms.push(if nu == 1 {
                        -dec.d.iter().fold(T::zero(), |a, &d| a + d.ln())
                    } else {
                        let s = dec.d.iter().fold(T::zero(), |a, &d| a + d.powf(T::one() - nu_t));
                        nu_t / (nu_t - T::one()) * s
                    });
                    phi.push(dec.apply(|d| d.powf(-nu_t)));
                }
                Family::KullbackLeibler => {
                    let p = dec.apply(|d| d.exp());
                    margin = margin.min(dec.min().exp());
                    terms.push(p.trace());
                    phi.push(p);
                }
            }
            decs.push(dec);
        }
        let value = integrate_half(&grid, |k| terms[k]) + trace_lambda;
        Some(DualPoint {
            value,
            margin,
            decs,
            phi,
        })
    }

    fn require(&self, lambda: &SymmetricMatrix<T>) -> Result<DualPoint<T>> {
        self.evaluate_matrix(lambda)?.ok_or_else(|| {
            let margin = self.inner_margin(lambda).unwrap_or(f64::NAN);
            Error::NotAdmissible { margin }
        })
    }

    fn inner_margin(&self, lambda: &SymmetricMatrix<T>) -> Result<f64> {
        let scale = direction_scale::<T>(self.family);
        let adj = self.bank.gamma_adjoint(lambda)?;
        Ok(self
            .base
            .iter()
            .zip(&adj)
            .map(|(b, s)| b.add(&s.scale(scale)).min_eigenvalue())
            .fold(T::max_value().unwrap(), |a, b| a.min(b))
            .as_f64())
    }

    /// Admissibility margin of `Λ`: smallest eigenvalue of `Ψ^{-1/ν} + G*ΛG/ν` over the grid.
    pub fn margin(&self, lambda: &SymmetricMatrix<T>) -> Result<T> {
        Ok(T::lit(self.inner_margin(lambda)?))
    }

    pub fn multiplier(&self, lambda: &SymmetricMatrix<T>) -> Result<Multiplier<T>> {
        let point = self.require(lambda)?;
        Ok(Multiplier {
            lambda: lambda.clone(),
            coordinates: self.basis.coordinates(lambda),
            margin: point.margin,
        })
    }

    /// `Φ(Λ)` on the grid.
    pub fn phi(&self, lambda: &SymmetricMatrix<T>) -> Result<SpectrumGrid<T>> {
        let point = self.require(lambda)?;
        SpectrumGrid::from_half(*self.psi.grid(), self.psi.dim(), point.phi)
    }

    pub fn dual_value(&self, lambda: &SymmetricMatrix<T>) -> Result<T> {
        Ok(self.require(lambda)?.value)
    }

    /// Gradient matrix `I - ∫ G Φ(Λ) G*`, paired with directions through `tr(∇ δΛ)`.
    pub fn gradient_matrix(&self, lambda: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        let point = self.require(lambda)?;
        let moment = self.bank.gamma_half(&point.phi)?;
        Ok(SymmetricMatrix::identity(self.bank.state_dim()).sub(&moment))
    }

    /// Gradient in basis coordinates.
    pub fn gradient_coordinates(&self, lambda: &SymmetricMatrix<T>) -> Result<DVector<T>> {
        let point = self.require(lambda)?;
        Ok(self.gradient(&point))
    }

    /// Second-variation operator
    /// `H(δΛ) = (1/ν) Σ_{l=1}^{ν} ∫ G Q^l G* δΛ G Q^{ν+1-l} G*`.
    pub fn hessian_apply(&self, lambda: &SymmetricMatrix<T>, dlambda: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        let point = self.require(lambda)?;
        let s = self.bank.gamma_adjoint(dlambda)?;
        let inner: Vec<HermitianMatrix<T>> = point
            .decs
            .iter()
            .zip(&s)
            .map(|(dec, sk)| dec.frechet(sk, |a, b| self.kernel(a, b)))
            .collect();
        self.bank.gamma_half(&inner)
    }

    /// `∂Φ/∂(G*ΛG)`-type kernel so that `H_ij = ∫ Σ_ab K_ab S̃_j[a,b] conj(S̃_i[a,b])`
    /// with `S = G*ΣG` rotated into the eigenbasis of the inner matrix.
    fn kernel(&self, a: T, b: T) -> T {
        match self.family {
            Family::Nu(nu) => {
                let nu_t = T::lit(f64::from(nu));
                -power_divided_difference(a, b, -nu_t) / nu_t
            }
            Family::KullbackLeibler => exp_divided_difference(a, b),
        }
    }

    fn hessian(&self, point: &DualPoint<T>) -> DMatrix<T> {
        let grid = *self.psi.grid();
        let dim = self.directions.len();
        let m = self.psi.dim();
        // The stored directions carry a factor 1/ν each (or -1); rescale to G*ΣG.
        let s = direction_scale::<T>(self.family);
        let rescale = (s * s).recip();
        let mut h = DMatrix::<T>::zeros(dim, dim);
        for (k, dec) in point.decs.iter().enumerate() {
            let kernel = DMatrix::from_fn(m, m, |a, b| self.kernel(dec.d[a], dec.d[b]));
            let rotated: Vec<DMatrix<Complex<T>>> = self
                .directions
                .iter()
                .map(|dir| dec.u.adjoint() * dir[k].as_matrix() * &dec.u)
                .collect();
            let w = grid.half_weight::<T>(k) * rescale;
            for i in 0..dim {
                let ki = rotated[i].zip_map(&kernel, |z, kk| z * kk);
                for j in 0..=i {
                    let v = ki.zip_fold(&rotated[j], T::zero(), |acc, x, y| acc + (x * y.conj()).re);
                    h[(i, j)] += w * v;
                }
            }
        }
        for i in 0..dim {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    /// Hessian matrix on the Range Γ basis.
    pub fn hessian_matrix(&self, lambda: &SymmetricMatrix<T>) -> Result<DMatrix<T>> {
        Ok(self.hessian(&self.require(lambda)?))
    }

    /// Runs the Newton iteration from `Λ₀ = I`, or from `Λ₀ = 0` when the
    /// prior already satisfies the constraint.
    pub fn solve(&self, options: &NewtonOptions) -> Result<Solution<T>> {
        let n = self.bank.state_dim();
        let identity = SymmetricMatrix::identity(n);
        let residual = self.basis.residual(&identity);
        if residual > T::lit(RANGE_TOL) {
            return Err(Error::NotInRangeGamma {
                residual: residual.as_f64(),
            });
        }
        let zero = DVector::zeros(self.basis.len());
        let at_zero = self.evaluate(&zero)?.ok_or(Error::InitialPointInadmissible)?;
        let (x0, start) = if self.gradient(&at_zero).norm() < T::lit(options.tolerance) {
            (zero, "zero")
        } else {
            let x = self.basis.coordinates(&identity);
            if self.evaluate(&x)?.is_some() {
                (x, "identity")
            } else {
                (zero, "zero")
            }
        };
        let out = damped_newton(self, x0, options)?;
        let lambda = self.basis.combine(&out.x);
        let phi = SpectrumGrid::from_half(*self.psi.grid(), self.psi.dim(), out.point.phi)?;
        let moment = self.bank.gamma_op(&phi)?;
        let constraint_residual = moment.sub(&identity).norm();
        let divergence = match self.family {
            Family::Nu(nu) => nu_divergence(&phi, &self.psi, nu)?,
            Family::KullbackLeibler => kl_divergence(&phi, &self.psi)?,
        };
        let report = SolverReport {
            nu: match self.family {
                Family::Nu(nu) => Some(nu),
                Family::KullbackLeibler => None,
            },
            start: start.into(),
            iterations: out.trace,
            lambda: matrix_rows(lambda.as_matrix()),
            constraint_residual: constraint_residual.as_f64(),
            divergence: divergence.as_f64(),
            gradient_norm: out.gradient.norm().as_f64(),
        };
        Ok(Solution {
            phi,
            multiplier: Multiplier {
                lambda,
                coordinates: out.x,
                margin: out.point.margin,
            },
            report,
        })
    }
}

fn direction_scale<T: Real>(family: Family) -> T {
    match family {
        Family::Nu(nu) => T::lit(f64::from(nu)).recip(),
        Family::KullbackLeibler => -T::one(),
    }
}

impl<T: Real> NewtonObjective<T> for DualProblem<T> {
    type Point = DualPoint<T>;

    fn evaluate(&self, x: &DVector<T>) -> Result<Option<DualPoint<T>>> {
        let inner: Vec<HermitianMatrix<T>> = self
            .base
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut r = b.as_matrix().clone();
                for (dir, &c) in self.directions.iter().zip(x.iter()) {
                    r += dir[k].as_matrix() * Complex::new(c, T::zero());
                }
                Hermitian::symmetrized(r)
            })
            .collect();
        Ok(self.point_from_inner(inner, self.basis_traces.dot(x)))
    }

    fn gradient(&self, point: &DualPoint<T>) -> DVector<T> {
        let grid = *self.psi.grid();
        let s = direction_scale::<T>(self.family).recip();
        DVector::from_iterator(
            self.directions.len(),
            self.directions.iter().zip(self.basis_traces.iter()).map(|(dir, &tr)| {
                tr - s * integrate_half(&grid, |k| point.phi[k].inner(&dir[k]))
            }),
        )
    }

    fn newton_direction(&self, point: &DualPoint<T>, gradient: &DVector<T>) -> Result<DVector<T>> {
        // Coordinates of Y = Σ α_k Y_k against the orthonormal basis: H α = -g.
        solve_newton_system(self.hessian(point), gradient)
    }
}

/// `Φ_ν(Λ) = (Ψ^{-1/ν} + G*ΛG/ν)^{-ν}`.
pub fn phi_nu<T: Real>(
    lambda: &SymmetricMatrix<T>,
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<SpectrumGrid<T>> {
    pointwise(lambda, psi, bank, Family::Nu(nu))
}

/// `Φ_KL(Λ) = exp(log Ψ - G*ΛG)`.
pub fn phi_kl<T: Real>(lambda: &SymmetricMatrix<T>, psi: &SpectrumGrid<T>, bank: &FilterBank<T>) -> Result<SpectrumGrid<T>> {
    pointwise(lambda, psi, bank, Family::KullbackLeibler)
}

/// `Q_Λ = (Ψ^{-1/ν} + G*ΛG/ν)^{-1}`.
pub fn q_lambda<T: Real>(
    lambda: &SymmetricMatrix<T>,
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<SpectrumGrid<T>> {
    let nu_t = T::lit(f64::from(nu));
    let adj = bank.gamma_adjoint(lambda)?;
    check_shapes(psi, bank)?;
    let half = psi
        .half()
        .iter()
        .zip(&adj)
        .map(|(p, s)| {
            let r = p.eigh().apply(|d| d.powf(-nu_t.recip())).add(&s.scale(nu_t.recip()));
            let dec = r.eigh();
            dec.check_positive_definite().map_err(|_| Error::NotAdmissible {
                margin: dec.min().as_f64(),
            })?;
            Ok(dec.apply(|d| d.recip()))
        })
        .collect::<Result<Vec<_>>>()?;
    SpectrumGrid::from_half(*psi.grid(), psi.dim(), half)
}

fn check_shapes<T: Real>(psi: &SpectrumGrid<T>, bank: &FilterBank<T>) -> Result<()> {
    if psi.grid() != bank.grid() || psi.dim() != bank.input_dim() {
        return Err(Error::GridMismatch(format!(
            "prior ({} points, dimension {}) does not match filter bank ({} points, {} inputs)",
            psi.grid().len(),
            psi.dim(),
            bank.grid().len(),
            bank.input_dim()
        )));
    }
    Ok(())
}

fn pointwise<T: Real>(
    lambda: &SymmetricMatrix<T>,
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    family: Family,
) -> Result<SpectrumGrid<T>> {
    family.check()?;
    check_shapes(psi, bank)?;
    let adj = bank.gamma_adjoint(lambda)?;
    let half = psi
        .half()
        .iter()
        .zip(&adj)
        .map(|(p, s)| {
            let pd = p.eigh();
            match family {
                Family::Nu(nu) => {
                    let nu_t = T::lit(f64::from(nu));
                    let r = pd.apply(|d| d.powf(-nu_t.recip())).add(&s.scale(nu_t.recip()));
                    let dec = r.eigh();
                    dec.check_positive_definite().map_err(|_| Error::NotAdmissible {
                        margin: dec.min().as_f64(),
                    })?;
                    Ok(dec.apply(|d| d.powf(-nu_t)))
                }
                Family::KullbackLeibler => {
                    let y = pd.apply(|d| d.ln()).sub(s);
                    Ok(y.eigh().apply(|d| d.exp()))
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    SpectrumGrid::from_half(*psi.grid(), psi.dim(), half)
}

/// Dual functional `J_ν(Λ)`.
pub fn dual_value<T: Real>(lambda: &SymmetricMatrix<T>, psi: &SpectrumGrid<T>, bank: &FilterBank<T>, nu: u32) -> Result<T> {
    DualProblem::new(psi, bank, Family::Nu(nu))?.dual_value(lambda)
}

/// Gradient matrix `I - ∫ G Q_Λ^ν G*`.
pub fn dual_gradient<T: Real>(
    lambda: &SymmetricMatrix<T>,
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<SymmetricMatrix<T>> {
    DualProblem::new(psi, bank, Family::Nu(nu))?.gradient_matrix(lambda)
}

/// Second variation `H(δΛ)`.
pub fn dual_hessian_apply<T: Real>(
    lambda: &SymmetricMatrix<T>,
    dlambda: &SymmetricMatrix<T>,
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<SymmetricMatrix<T>> {
    DualProblem::new(psi, bank, Family::Nu(nu))?.hessian_apply(lambda, dlambda)
}

/// Solves the approximation problem for a bank whose identity state covariance
/// is prescribed, with the default options.
pub fn newton_solve<T: Real>(psi: &SpectrumGrid<T>, bank: &FilterBank<T>, nu: u32) -> Result<Solution<T>> {
    DualProblem::new(psi, bank, Family::Nu(nu))?.solve(&SPECTAPPROX_OPTIONS)
}

/// Whitens `bank` with `sigma`, then solves; the multiplier is returned in
/// whitened coordinates.
pub fn solve_with_covariance<T: Real>(
    psi: &SpectrumGrid<T>,
    bank: &FilterBank<T>,
    sigma: &SymmetricMatrix<T>,
    family: Family,
    options: &NewtonOptions,
) -> Result<Solution<T>> {
    let whitened = bank.whiten(sigma)?;
    DualProblem::new(psi, &whitened.bank, family)?.solve(options)
}
