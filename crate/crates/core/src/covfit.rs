//! Structured covariance estimation: the matrix in Range Γ closest to a
//! sample covariance `Σ̂` under the Beta matrix divergence.
//!
//! Range Γ is the kernel of `V(Q) = Π (Q - A Q Aᵀ) Π` with
//! `Π = I - B (BᵀB)^{-1} Bᵀ`. The problem is solved through its dual in the
//! multiplier `Δ ∈ [ker V*]^⊥`; the primal optimum is
//! `P_ν(Δ) = (Σ̂^{-1/ν} + V*(Δ)/ν)^{-ν}`.

use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::error::{Error, Result};
use crate::filterbank::{numerical_rank, smat, svec, FilterBank, RANK_TOL};
use crate::matfun::{
    exp_divided_difference, herm_power, matrix_exp, matrix_log, power_divided_difference, Hermitian,
    SpectralDecomposition, SymmetricMatrix,
};
use crate::newton::{damped_newton, EvaluatedPoint, IterationRecord, NewtonObjective, NewtonOptions};
use crate::scalar::Real;
use crate::spectra::BETA_LIMIT_GAP;

/// Defaults for the covariance dual.
pub const COVFIT_OPTIONS: NewtonOptions = NewtonOptions {
    tolerance: 1e-9,
    alpha: 0.25,
    max_iterations: 200,
    max_halvings: 60,
};

/// Which member of the divergence family is minimized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovObjective {
    /// `D_ν` with `β = 1 - 1/ν`; `ν = 1` is the Burg / information divergence.
    Nu(u32),
    /// Matrix Kullback-Leibler divergence (the `ν → ∞` limit).
    KullbackLeibler,
}

/// Beta matrix divergence
/// `D_β(P‖Q) = tr[(P^β - P Q^{β-1})/(β-1) - (P^β - Q^β)/β]`.
pub fn beta_matrix_divergence<T: Real>(p: &SymmetricMatrix<T>, q: &SymmetricMatrix<T>, beta: T) -> Result<T> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("matrix sizes differ: {} vs {}", p.dim(), q.dim())));
    }
    let dp = pd(p)?;
    let dq = pd(q)?;
    let one = T::one();
    if beta.abs() < T::lit(BETA_LIMIT_GAP) {
        let log_det_p = dp.d.iter().fold(T::zero(), |a, &d| a + d.ln());
        let log_det_q = dq.d.iter().fold(T::zero(), |a, &d| a + d.ln());
        let q_inv = dq.apply(|d| d.recip());
        return Ok(log_det_q - log_det_p + p.inner(&q_inv) - T::from_usize_lossy(p.dim()));
    }
    if (beta - one).abs() < T::lit(BETA_LIMIT_GAP) {
        let p_log_p = dp.d.iter().fold(T::zero(), |a, &d| a + d * d.ln());
        let log_q = dq.apply(|d| d.ln());
        return Ok(p_log_p - p.inner(&log_q) - p.trace() + q.trace());
    }
    let tr_p = dp.d.iter().fold(T::zero(), |a, &d| a + d.powf(beta));
    let tr_q = dq.d.iter().fold(T::zero(), |a, &d| a + d.powf(beta));
    let cross = p.inner(&dq.apply(|d| d.powf(beta - one)));
    Ok((tr_p - cross) / (beta - one) - (tr_p - tr_q) / beta)
}

/// `D_ν(P‖Q)`, `β = 1 - 1/ν`.
pub fn nu_matrix_divergence<T: Real>(p: &SymmetricMatrix<T>, q: &SymmetricMatrix<T>, nu: u32) -> Result<T> {
    check_nu(nu)?;
    beta_matrix_divergence(p, q, T::one() - T::one() / T::lit(f64::from(nu)))
}

fn objective_divergence<T: Real>(p: &SymmetricMatrix<T>, q: &SymmetricMatrix<T>, kind: CovObjective) -> Result<T> {
    match kind {
        CovObjective::Nu(nu) => nu_matrix_divergence(p, q, nu),
        CovObjective::KullbackLeibler => beta_matrix_divergence(p, q, T::one()),
    }
}

fn check_nu(nu: u32) -> Result<()> {
    if nu == 0 {
        return Err(Error::InvalidArgument("nu must be a positive integer".into()));
    }
    Ok(())
}

fn pd<T: Real>(x: &SymmetricMatrix<T>) -> Result<SpectralDecomposition<T>> {
    let dec = x.eigh();
    dec.check_positive_definite()?;
    Ok(dec)
}

/// The operator `V` and its adjoint for a filter bank.
#[derive(Clone, Debug)]
pub struct VOperator<T: Real> {
    a: DMatrix<T>,
    pi: DMatrix<T>,
}

impl<T: Real> VOperator<T> {
    pub fn new(bank: &FilterBank<T>) -> Result<Self> {
        let b = bank.b();
        let gram = b.transpose() * b;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| Error::RankDeficientB { rank: numerical_rank(b), m: b.ncols() })?;
        let n = b.nrows();
        let pi = DMatrix::<T>::identity(n, n) - b * gram_inv * b.transpose();
        Ok(Self {
            a: bank.a().clone(),
            pi: Hermitian::symmetrized(pi).into_matrix(),
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn check(&self, x: &SymmetricMatrix<T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "matrix has size {}, state dimension is {}",
                x.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `V(Q) = Π (Q - A Q Aᵀ) Π`.
    pub fn apply(&self, q: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        self.check(q)?;
        let q = q.as_matrix();
        let inner = q - &self.a * q * self.a.transpose();
        Ok(Hermitian::symmetrized(&self.pi * inner * &self.pi))
    }

    /// `V*(Δ) = Π Δ Π - Aᵀ Π Δ Π A`.
    pub fn adjoint(&self, delta: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        self.check(delta)?;
        let pdp = &self.pi * delta.as_matrix() * &self.pi;
        let out = &pdp - self.a.transpose() * &pdp * &self.a;
        Ok(Hermitian::symmetrized(out))
    }

    /// Orthonormal basis of `[ker V*]^⊥ = Range V`.
    pub fn range_basis(&self) -> Result<Vec<SymmetricMatrix<T>>> {
        let n = self.dim();
        let big_n = n * (n + 1) / 2;
        let mut mat = DMatrix::<T>::zeros(big_n, big_n);
        for j in 0..big_n {
            let mut e = DVector::<T>::zeros(big_n);
            e[j] = T::one();
            let col = svec(&self.apply(&smat(&e, n))?);
            mat.set_column(j, &col);
        }
        let svd = mat.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
        Ok(svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| top > T::zero() && s > T::lit(RANK_TOL) * top)
            .map(|(k, _)| smat(&u.column(k).into_owned(), n))
            .collect())
    }
}

/// Dual variable of the covariance problem.
#[derive(Clone, Debug)]
pub struct CovDualPoint<T: Real> {
    pub delta: SymmetricMatrix<T>,
    /// Smallest eigenvalue of `Σ̂^{-1/ν} + V*(Δ)/ν` (of `Σ̂^{-1} + V*(Δ)` for
    /// `ν = 1`); not meaningful for the KL objective, where every `Δ` is admissible.
    pub certificate: T,
}

#[derive(Clone, Debug)]
pub struct CovFitResult<T: Real> {
    pub p: SymmetricMatrix<T>,
    pub dual: CovDualPoint<T>,
    /// `D(P‖Σ̂)` for the selected objective.
    pub divergence: T,
    /// `‖V(P)‖_F`.
    pub residual: T,
    pub trace: Vec<IterationRecord>,
}

impl<T: Real> CovFitResult<T> {
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "P": matrix_rows(self.p.as_matrix()),
            "divergence": self.divergence.as_f64(),
            "residual": self.residual.as_f64(),
            "iterations": self.iterations(),
            "trace": self.trace,
        })
    }
}

pub fn matrix_rows<T: Real>(m: &DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].as_f64()).collect())
        .collect()
}

/// The covariance dual for a fixed `Σ̂`, bank and objective.
#[derive(Clone, Debug)]
pub struct CovFitProblem<T: Real> {
    sigma_hat: SymmetricMatrix<T>,
    v: VOperator<T>,
    kind: CovObjective,
    /// `Σ̂^{-1/ν}` or `log Σ̂`.
    base: SymmetricMatrix<T>,
    basis: Vec<SymmetricMatrix<T>>,
    /// `V*` of each basis element, pre-scaled by `1/ν` (by `-1` for KL).
    directions: Vec<SymmetricMatrix<T>>,
}

/// Cached evaluation at an admissible `Δ`.
pub struct CovPoint<T: Real> {
    value: T,
    certificate: T,
    /// Eigen-decomposition of `R = Σ̂^{-1/ν} + V*(Δ)/ν` or of `log Σ̂ - V*(Δ)`.
    dec: SpectralDecomposition<T>,
    p: SymmetricMatrix<T>,
}

impl<T: Real> EvaluatedPoint<T> for CovPoint<T> {
    fn value(&self) -> T {
        self.value
    }
    fn margin(&self) -> T {
        self.certificate
    }
}

impl<T: Real> CovFitProblem<T> {
    pub fn new(sigma_hat: &SymmetricMatrix<T>, bank: &FilterBank<T>, kind: CovObjective) -> Result<Self> {
        if sigma_hat.dim() != bank.state_dim() {
            return Err(Error::Dimension(format!(
                "sample covariance has size {}, state dimension is {}",
                sigma_hat.dim(),
                bank.state_dim()
            )));
        }
        pd(sigma_hat)?;
        let v = VOperator::new(bank)?;
        let basis = v.range_basis()?;
        let (base, scale) = match kind {
            CovObjective::Nu(nu) => {
                check_nu(nu)?;
                let nu_t = T::lit(f64::from(nu));
                (herm_power(sigma_hat, -nu_t.recip())?, nu_t.recip())
            }
            CovObjective::KullbackLeibler => (matrix_log(sigma_hat)?, -T::one()),
        };
        let directions = basis
            .iter()
            .map(|e| v.adjoint(e).map(|w| w.scale(scale)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sigma_hat: sigma_hat.clone(),
            v,
            kind,
            base,
            basis,
            directions,
        })
    }

    pub fn v_operator(&self) -> &VOperator<T> {
        &self.v
    }

    /// Orthonormal basis of `[ker V*]^⊥` used for the dual coordinates.
    pub fn basis(&self) -> &[SymmetricMatrix<T>] {
        &self.basis
    }

    pub fn coordinates(&self, delta: &SymmetricMatrix<T>) -> DVector<T> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|e| delta.inner(e)))
    }

    pub fn delta_of(&self, x: &DVector<T>) -> SymmetricMatrix<T> {
        combine(&self.basis, x, self.sigma_hat.dim())
    }

    fn inner_matrix(&self, delta: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        let w = self.v.adjoint(delta)?;
        Ok(match self.kind {
            CovObjective::Nu(nu) => self.base.add(&w.scale(T::lit(f64::from(nu)).recip())),
            CovObjective::KullbackLeibler => self.base.sub(&w),
        })
    }

    fn point_from_inner(&self, r: &SymmetricMatrix<T>) -> Option<CovPoint<T>> {
        let dec = r.eigh();
        match self.kind {
            CovObjective::Nu(nu) => {
                if dec.check_positive_definite().is_err() {
                    return None;
                }
                let nu_t = T::lit(f64::from(nu));
                let value = if nu == 1 {
                    -dec.d.iter().fold(T::zero(), |a, &d| a + d.ln())
                } else {
                    let s = dec.d.iter().fold(T::zero(), |a, &d| a + d.powf(T::one() - nu_t));
                    nu_t / (nu_t - T::one()) * s
                };
                let p = dec.apply(|d| d.powf(-nu_t));
                Some(CovPoint {
                    value,
                    certificate: dec.min(),
                    dec,
                    p,
                })
            }
            CovObjective::KullbackLeibler => {
                let p = dec.apply(|d| d.exp());
                Some(CovPoint {
                    value: p.trace() - self.sigma_hat.trace(),
                    certificate: p.min_eigenvalue(),
                    dec,
                    p,
                })
            }
        }
    }

    fn point(&self, delta: &SymmetricMatrix<T>) -> Result<CovPoint<T>> {
        let r = self.inner_matrix(delta)?;
        self.point_from_inner(&r).ok_or_else(|| Error::NotAdmissible {
            margin: r.min_eigenvalue().as_f64(),
        })
    }

    /// Primal candidate `P_ν(Δ)` or `P_KL(Δ)`.
    pub fn primal(&self, delta: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        Ok(self.point(delta)?.p)
    }

    pub fn dual_value(&self, delta: &SymmetricMatrix<T>) -> Result<T> {
        Ok(self.point(delta)?.value)
    }

    /// Gradient matrix `-Proj_{[ker V*]^⊥} V(P(Δ))`.
    pub fn dual_gradient(&self, delta: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        let p = self.point(delta)?;
        let g = self.gradient(&p);
        Ok(combine(&self.basis, &g, self.sigma_hat.dim()))
    }

    /// Hessian on the basis, `H_ij = Σ_ab K(d_a, d_b) W̃_i[a,b] W̃_j[a,b]` in the
    /// eigenbasis of the inner matrix.
    fn hessian(&self, point: &CovPoint<T>) -> DMatrix<T> {
        let n = self.sigma_hat.dim();
        let d = &point.dec.d;
        let kernel = DMatrix::from_fn(n, n, |a, b| match self.kind {
            CovObjective::Nu(nu) => {
                let nu_t = T::lit(f64::from(nu));
                // The scaled directions carry a 1/ν each; undo one of them.
                -nu_t * power_divided_difference(d[a], d[b], -nu_t)
            }
            CovObjective::KullbackLeibler => exp_divided_difference(d[a], d[b]),
        });
        let u = &point.dec.u;
        let rotated: Vec<DMatrix<T>> = self
            .directions
            .iter()
            .map(|w| u.transpose() * w.as_matrix() * u)
            .collect();
        let dim = rotated.len();
        let mut h = DMatrix::<T>::zeros(dim, dim);
        for i in 0..dim {
            let ki = rotated[i].component_mul(&kernel);
            for j in 0..=i {
                let v = ki.dot(&rotated[j]);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    /// Hessian matrix on the `[ker V*]^⊥` basis at `Δ`.
    pub fn hessian_matrix(&self, delta: &SymmetricMatrix<T>) -> Result<DMatrix<T>> {
        Ok(self.hessian(&self.point(delta)?))
    }

    /// Minimizes the dual from `Δ = 0`.
    pub fn solve(&self, options: &NewtonOptions) -> Result<CovFitResult<T>> {
        let x0 = DVector::zeros(self.basis.len());
        let out = damped_newton(self, x0, options)?;
        let delta = self.delta_of(&out.x);
        let p = out.point.p;
        let residual = self.v.apply(&p)?.norm();
        let divergence = objective_divergence(&p, &self.sigma_hat, self.kind)?;
        Ok(CovFitResult {
            dual: CovDualPoint {
                delta,
                certificate: out.point.certificate,
            },
            divergence,
            residual,
            trace: out.trace,
            p,
        })
    }
}

impl<T: Real> NewtonObjective<T> for CovFitProblem<T> {
    type Point = CovPoint<T>;

    fn evaluate(&self, x: &DVector<T>) -> Result<Option<CovPoint<T>>> {
        let mut r = self.base.as_matrix().clone();
        for (w, &c) in self.directions.iter().zip(x.iter()) {
            r += w.as_matrix() * c;
        }
        Ok(self.point_from_inner(&Hermitian::symmetrized(r)))
    }

    fn gradient(&self, point: &CovPoint<T>) -> DVector<T> {
        // ⟨-V(P), E_k⟩ = -⟨P, V*(E_k)⟩; the directions carry a factor 1/ν (or -1).
        let factor = match self.kind {
            CovObjective::Nu(nu) => -T::lit(f64::from(nu)),
            CovObjective::KullbackLeibler => T::one(),
        };
        DVector::from_iterator(
            self.directions.len(),
            self.directions.iter().map(|w| point.p.inner(w) * factor),
        )
    }

    fn newton_direction(&self, point: &CovPoint<T>, gradient: &DVector<T>) -> Result<DVector<T>> {
        solve_newton_system(self.hessian(point), gradient)
    }
}

/// Solves `H d = -g` by SVD, failing if `H` is numerically rank deficient.
pub(crate) fn solve_newton_system<T: Real>(h: DMatrix<T>, gradient: &DVector<T>) -> Result<DVector<T>> {
    let dim = h.nrows();
    if let Some(chol) = h.clone().cholesky() {
        return Ok(-chol.solve(gradient));
    }
    let svd = h.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let tol = T::lit(RANK_TOL) * top;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < dim {
        return Err(Error::SingularHessian { rank, dim });
    }
    let sol = svd
        .solve(gradient, tol)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(-sol)
}

pub(crate) fn combine<T: Real>(basis: &[SymmetricMatrix<T>], x: &DVector<T>, n: usize) -> SymmetricMatrix<T> {
    let mut acc = DMatrix::<T>::zeros(n, n);
    for (e, &c) in basis.iter().zip(x.iter()) {
        acc += e.as_matrix() * c;
    }
    Hermitian::symmetrized(acc)
}

/// `P_ν(Δ) = (Σ̂^{-1/ν} + V*(Δ)/ν)^{-ν}`.
pub fn p_nu<T: Real>(
    delta: &SymmetricMatrix<T>,
    sigma_hat: &SymmetricMatrix<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<SymmetricMatrix<T>> {
    CovFitProblem::new(sigma_hat, bank, CovObjective::Nu(nu))?.primal(delta)
}

/// `P_KL(Δ) = exp(log Σ̂ - V*(Δ))`.
pub fn p_kl<T: Real>(
    delta: &SymmetricMatrix<T>,
    sigma_hat: &SymmetricMatrix<T>,
    bank: &FilterBank<T>,
) -> Result<SymmetricMatrix<T>> {
    let v = VOperator::new(bank)?;
    Ok(matrix_exp(&matrix_log(sigma_hat)?.sub(&v.adjoint(delta)?)))
}

/// Dual objective `J_ν(Δ)`.
pub fn cov_dual_value<T: Real>(
    delta: &SymmetricMatrix<T>,
    sigma_hat: &SymmetricMatrix<T>,
    bank: &FilterBank<T>,
    nu: u32,
) -> Result<T> {
    CovFitProblem::new(sigma_hat, bank, CovObjective::Nu(nu))?.dual_value(delta)
}

/// Projects `Σ̂` onto Range Γ under `D_ν` with the default options.
pub fn solve_covfit<T: Real>(sigma_hat: &SymmetricMatrix<T>, bank: &FilterBank<T>, nu: u32) -> Result<CovFitResult<T>> {
    CovFitProblem::new(sigma_hat, bank, CovObjective::Nu(nu))?.solve(&COVFIT_OPTIONS)
}

/// Projects `Σ̂` onto Range Γ under the matrix KL divergence.
pub fn solve_covfit_kl<T: Real>(sigma_hat: &SymmetricMatrix<T>, bank: &FilterBank<T>) -> Result<CovFitResult<T>> {
    CovFitProblem::new(sigma_hat, bank, CovObjective::KullbackLeibler)?.solve(&COVFIT_OPTIONS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::FrequencyGrid;

    fn bank() -> FilterBank<f64> {
        FilterBank::covariance_extension(3, 1, FrequencyGrid::new(64).unwrap()).unwrap()
    }

    fn spd() -> SymmetricMatrix<f64> {
        Hermitian::new(DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.5, 0.3, 0.1, 0.3, 1.0])).unwrap()
    }

    #[test]
    fn divergence_zero_on_equal() {
        let q = spd();
        for beta in [0.0, 0.5, 1.0, 2.0] {
            assert!(beta_matrix_divergence(&q, &q, beta).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn delta_zero_returns_sample() {
        let p = p_nu(&SymmetricMatrix::zeros(3), &spd(), &bank(), 2).unwrap();
        assert!((p.as_matrix() - spd().as_matrix()).norm() < 1e-13);
        let p = p_kl(&SymmetricMatrix::zeros(3), &spd(), &bank()).unwrap();
        assert!((p.as_matrix() - spd().as_matrix()).norm() < 1e-13);
    }

    #[test]
    fn identity_dual_value() {
        let j = cov_dual_value(&SymmetricMatrix::zeros(3), &SymmetricMatrix::identity(3), &bank(), 3).unwrap();
        assert!((j - 4.5).abs() < 1e-13);
    }

    #[test]
    fn toeplitz_basis_dimension() {
        // Range Γ for the delay bank is the Toeplitz matrices: dimension n.
        let v = VOperator::new(&bank()).unwrap();
        assert_eq!(v.range_basis().unwrap().len(), 6 - 3);
    }

    #[test]
    fn solve_gives_toeplitz() {
        let r = solve_covfit(&spd(), &bank(), 2).unwrap();
        let p = r.p.as_matrix();
        assert!((p[(0, 0)] - p[(1, 1)]).abs() < 1e-8 && (p[(1, 1)] - p[(2, 2)]).abs() < 1e-8);
        assert!((p[(0, 1)] - p[(1, 2)]).abs() < 1e-8);
        assert!(r.residual < 1e-8);
    }
}
