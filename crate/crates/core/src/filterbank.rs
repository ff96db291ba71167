//! Rational filter bank `G(z) = (zI - A)^{-1} B` and its moment operator.
//!
//! Feeding a process with spectrum `Φ` through the bank gives the state
//! covariance `Σ = Γ(Φ) = ∫ G Φ G*`. The adjoint maps a symmetric multiplier
//! to the Hermitian-valued function `Γ*(Λ)(θ) = G*(e^{jθ}) Λ G(e^{jθ})`.

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, LU};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matfun::{herm_power, Hermitian, HermitianMatrix, SymmetricMatrix};
use crate::scalar::Real;
use crate::spectra::{FrequencyGrid, SpectrumGrid};

/// `ρ(A)` must stay below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Relative singular value cut-off for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Relative residual above which a matrix is declared outside Range Γ.
pub const RANGE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FilterBank<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    grid: FrequencyGrid,
    /// `G(e^{jθ_k})` for `k = 0..=K/2`.
    responses: Vec<DMatrix<Complex<T>>>,
    stein: LU<T, Dyn, Dyn>,
}

impl<T: Real> FilterBank<T> {
    /// Validates `(A, B)` and caches the frequency response on `grid`.
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, grid: FrequencyGrid) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, A has {n}", b.nrows())));
        }
        let m = b.ncols();
        if m == 0 || n <= m {
            return Err(Error::Dimension(format!("need state dimension n > input dimension m, got n = {n}, m = {m}")));
        }
        let rank_b = numerical_rank(&b);
        if rank_b < m {
            return Err(Error::RankDeficientB { rank: rank_b, m });
        }
        let radius = spectral_radius(&a);
        if radius >= T::one() - T::lit(STABILITY_MARGIN) {
            return Err(Error::UnstableA { radius: radius.as_f64() });
        }
        let mut krylov = DMatrix::<T>::zeros(n, n * m);
        let mut block = b.clone();
        for i in 0..n {
            krylov.view_mut((0, i * m), (n, m)).copy_from(&block);
            block = &a * block;
        }
        let rank = numerical_rank(&krylov);
        if rank < n {
            return Err(Error::NotReachable { rank, n });
        }

        let ac = a.map(|x| Complex::new(x, T::zero()));
        let bc = b.map(|x| Complex::new(x, T::zero()));
        let responses = (0..grid.half_len())
            .map(|k| {
                let t: T = grid.theta(k);
                let shift = DMatrix::<Complex<T>>::identity(n, n) * Complex::new(t.cos(), t.sin()) - &ac;
                shift.lu().solve(&bc).expect("zI - A is invertible on the unit circle for stable A")
            })
            .collect();

        let stein = (DMatrix::<T>::identity(n * n, n * n) - a.kronecker(&a)).lu();
        Ok(Self {
            a,
            b,
            grid,
            responses,
            stein,
        })
    }

    /// Bank of delays `G(z) = [z^{-n}, ..., z^{-1}]ᵀ ⊗ I_m`, whose state
    /// covariance is the block Toeplitz matrix of the first `n` autocovariances.
    pub fn covariance_extension(lags: usize, m: usize, grid: FrequencyGrid) -> Result<Self> {
        let n = lags * m;
        let mut a = DMatrix::<T>::zeros(n, n);
        for i in 0..n.saturating_sub(m) {
            a[(i, i + m)] = T::one();
        }
        let mut b = DMatrix::<T>::zeros(n, m);
        for j in 0..m {
            b[(n - m + j, j)] = T::one();
        }
        Self::new(a, b, grid)
    }

    /// Block-diagonal bank with the given poles (complex ones in conjugate
    /// pairs). `inputs = 1` uses `B = 1`; `inputs = 2` adds an alternating-sign
    /// column so that `B` has full column rank.
    pub fn pole_bank(poles: &[Complex<T>], inputs: usize, grid: FrequencyGrid) -> Result<Self> {
        let a = pole_state_matrix(poles)?;
        let n = a.nrows();
        let b = match inputs {
            1 => DMatrix::from_element(n, 1, T::one()),
            2 => DMatrix::from_fn(n, 2, |i, j| if j == 0 || i % 2 == 0 { T::one() } else { -T::one() }),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "pole bank supports 1 or 2 inputs, got {inputs}"
                )))
            }
        };
        Self::new(a, b, grid)
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// `G(e^{jθ_k})` for any `k < K`.
    pub fn response(&self, k: usize) -> DMatrix<Complex<T>> {
        let half = self.grid.half_len();
        if k < half {
            self.responses[k].clone()
        } else {
            self.responses[self.grid.len() - k].map(|z| z.conj())
        }
    }

    /// Responses on `θ ∈ [0, π]`.
    pub fn half_responses(&self) -> &[DMatrix<Complex<T>>] {
        &self.responses
    }

    /// `Γ(Φ) = ∫ G Φ G*`.
    pub fn gamma_op(&self, phi: &SpectrumGrid<T>) -> Result<SymmetricMatrix<T>> {
        if phi.grid() != &self.grid {
            return Err(Error::GridMismatch(format!(
                "spectrum has {} points, filter bank {}",
                phi.grid().len(),
                self.grid.len()
            )));
        }
        if phi.dim() != self.input_dim() {
            return Err(Error::GridMismatch(format!(
                "spectrum dimension {} does not match input dimension {}",
                phi.dim(),
                self.input_dim()
            )));
        }
        self.gamma_half(phi.half())
    }

    /// `∫ G F G*` for a real-process Hermitian function `F` given on `[0, π]`.
    pub fn gamma_half(&self, half: &[HermitianMatrix<T>]) -> Result<SymmetricMatrix<T>> {
        if half.len() != self.grid.half_len() {
            return Err(Error::GridMismatch(format!(
                "expected {} half-grid values, got {}",
                self.grid.half_len(),
                half.len()
            )));
        }
        let n = self.state_dim();
        let mut acc = DMatrix::<T>::zeros(n, n);
        for (k, (g, f)) in self.responses.iter().zip(half).enumerate() {
            let term = g * f.as_matrix() * g.adjoint();
            acc += term.map(|z| z.re) * self.grid.half_weight::<T>(k);
        }
        Ok(Hermitian::symmetrized(acc))
    }

    /// `Γ*(Λ)(θ_k) = G* Λ G` on `[0, π]`.
    pub fn gamma_adjoint(&self, lambda: &SymmetricMatrix<T>) -> Result<Vec<HermitianMatrix<T>>> {
        if lambda.dim() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "multiplier has size {}, state dimension is {}",
                lambda.dim(),
                self.state_dim()
            )));
        }
        let l = lambda.to_complex();
        Ok(self
            .responses
            .iter()
            .map(|g| Hermitian::symmetrized(g.adjoint() * l.as_matrix() * g))
            .collect())
    }

    /// Solves the Stein equation `P - A P Aᵀ = Q`.
    pub fn stein_solve(&self, q: &DMatrix<T>) -> Result<DMatrix<T>> {
        let n = self.state_dim();
        if q.shape() != (n, n) {
            return Err(Error::Dimension(format!("Stein right-hand side must be {n}x{n}")));
        }
        let rhs = DVector::from_column_slice(q.as_slice());
        let sol = self
            .stein
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidArgument("Stein operator is singular".into()))?;
        Ok(DMatrix::from_column_slice(n, n, sol.as_slice()))
    }

    /// State covariance of the bank driven by white noise of covariance `w`:
    /// `P = A P Aᵀ + B W Bᵀ`.
    pub fn white_noise_covariance(&self, w: &SymmetricMatrix<T>) -> Result<SymmetricMatrix<T>> {
        let q = &self.b * w.as_matrix() * self.b.transpose();
        Ok(Hermitian::symmetrized(self.stein_solve(&q)?))
    }

    /// Orthonormal basis (Frobenius inner product) of Range Γ, the set of
    /// symmetric `P` with `P - A P Aᵀ = B H + Hᵀ Bᵀ` for some `H`.
    pub fn range_gamma_basis(&self) -> Result<RangeGammaBasis<T>> {
        let n = self.state_dim();
        let m = self.input_dim();
        let mut candidates = Vec::with_capacity(n * m);
        for i in 0..m {
            for j in 0..n {
                let mut h = DMatrix::<T>::zeros(m, n);
                h[(i, j)] = T::one();
                let bh = &self.b * h;
                let q = &bh + bh.transpose();
                candidates.push(Hermitian::symmetrized(self.stein_solve(&q)?));
            }
        }
        Ok(RangeGammaBasis::orthonormalize(n, candidates))
    }

    /// Relative distance of `sigma` from Range Γ.
    pub fn range_gamma_residual(&self, sigma: &SymmetricMatrix<T>) -> Result<T> {
        Ok(self.range_gamma_basis()?.residual(sigma))
    }

    /// Rescales the state so that `sigma` becomes the identity:
    /// `Ā = S^{-1/2} A S^{1/2}`, `B̄ = S^{-1/2} B`, `Ḡ = S^{-1/2} G`.
    pub fn whiten(&self, sigma: &SymmetricMatrix<T>) -> Result<Whitened<T>> {
        if sigma.dim() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "covariance has size {}, state dimension is {}",
                sigma.dim(),
                self.state_dim()
            )));
        }
        let residual = self.range_gamma_residual(sigma)?;
        if residual > T::lit(RANGE_TOL) {
            return Err(Error::NotInRangeGamma {
                residual: residual.as_f64(),
            });
        }
        let root = herm_power(sigma, T::lit(0.5))?;
        let inv_root = herm_power(sigma, T::lit(-0.5))?;
        let a = inv_root.as_matrix() * &self.a * root.as_matrix();
        let b = inv_root.as_matrix() * &self.b;
        let bank = FilterBank::new(a, b, self.grid)?;
        Ok(Whitened {
            bank,
            inv_root,
            root,
        })
    }
}

/// A bank in whitened coordinates together with the transform `S^{-1/2}`.
#[derive(Clone, Debug)]
pub struct Whitened<T: Real> {
    pub bank: FilterBank<T>,
    pub inv_root: SymmetricMatrix<T>,
    pub root: SymmetricMatrix<T>,
}

impl<T: Real> Whitened<T> {
    /// Maps a whitened-coordinate multiplier `Λ̄` back: `Λ = S^{-1/2} Λ̄ S^{-1/2}`.
    pub fn unwhiten_multiplier(&self, lambda: &SymmetricMatrix<T>) -> SymmetricMatrix<T> {
        Hermitian::symmetrized(self.inv_root.as_matrix() * lambda.as_matrix() * self.inv_root.as_matrix())
    }
}

/// Orthonormal basis of a subspace of `n × n` symmetric matrices.
#[derive(Clone, Debug)]
pub struct RangeGammaBasis<T: Real> {
    n: usize,
    basis: Vec<SymmetricMatrix<T>>,
}

impl<T: Real> RangeGammaBasis<T> {
    /// Modified Gram-Schmidt with one reorthogonalization pass; candidates
    /// whose remainder falls below `RANK_TOL` of their norm are dropped.
    pub fn orthonormalize(n: usize, candidates: Vec<SymmetricMatrix<T>>) -> Self {
        let mut basis: Vec<SymmetricMatrix<T>> = Vec::new();
        for c in candidates {
            let scale = c.norm();
            if scale == T::zero() {
                continue;
            }
            let mut v = c;
            for _ in 0..2 {
                for q in &basis {
                    v = v.sub(&q.scale(v.inner(q)));
                }
            }
            let r = v.norm();
            if r > T::lit(RANK_TOL) * scale {
                basis.push(v.scale(r.recip()));
            }
        }
        Self { n, basis }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[SymmetricMatrix<T>] {
        &self.basis
    }

    pub fn coordinates(&self, x: &SymmetricMatrix<T>) -> DVector<T> {
        DVector::from_iterator(self.basis.len(), self.basis.iter().map(|q| x.inner(q)))
    }

    pub fn combine(&self, coords: &DVector<T>) -> SymmetricMatrix<T> {
        let mut acc = DMatrix::<T>::zeros(self.n, self.n);
        for (q, &c) in self.basis.iter().zip(coords.iter()) {
            acc += q.as_matrix() * c;
        }
        Hermitian::symmetrized(acc)
    }

    pub fn project(&self, x: &SymmetricMatrix<T>) -> SymmetricMatrix<T> {
        self.combine(&self.coordinates(x))
    }

    /// `‖X - proj X‖ / ‖X‖`.
    pub fn residual(&self, x: &SymmetricMatrix<T>) -> T {
        let scale = x.norm();
        if scale == T::zero() {
            return T::zero();
        }
        x.sub(&self.project(x)).norm() / scale
    }
}

/// State matrix of a pole bank: a 1×1 block per real pole and a rotation
/// block `r [[cos ω, -sin ω], [sin ω, cos ω]]` per conjugate pair.
pub fn pole_state_matrix<T: Real>(poles: &[Complex<T>]) -> Result<DMatrix<T>> {
    let tol = T::lit(1e-12);
    let mut blocks: Vec<DMatrix<T>> = Vec::new();
    let mut lower: Vec<Complex<T>> = poles.iter().copied().filter(|p| p.im < -tol).collect();
    for p in poles {
        if p.im.abs() <= tol {
            blocks.push(DMatrix::from_element(1, 1, p.re));
        } else if p.im > tol {
            let pos = lower
                .iter()
                .position(|q| (q - p.conj()).modulus() < T::lit(1e-9))
                .ok_or_else(|| Error::InvalidArgument(format!("pole {p} has no conjugate partner")))?;
            lower.remove(pos);
            blocks.push(DMatrix::from_row_slice(2, 2, &[p.re, -p.im, p.im, p.re]));
        }
    }
    if !lower.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "pole {} has no conjugate partner",
            lower[0]
        )));
    }
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut a = DMatrix::<T>::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let s = b.nrows();
        a.view_mut((at, at), (s, s)).copy_from(&b);
        at += s;
    }
    Ok(a)
}

pub(crate) fn spectral_radius<T: Real>(a: &DMatrix<T>) -> T {
    a.complex_eigenvalues().iter().map(|z| z.modulus()).fold(T::zero(), |x, y| x.max(y))
}

pub(crate) fn numerical_rank<T: Real>(m: &DMatrix<T>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if top == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > T::lit(RANK_TOL) * top).count()
}

/// Symmetric vectorization with `√2` weights on off-diagonals, so that
/// `svec(X)·svec(Y) = tr(XY)`. Order: column-major upper triangle.
pub fn svec<T: Real>(x: &SymmetricMatrix<T>) -> DVector<T> {
    let n = x.dim();
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let e = x.as_matrix()[(i, j)];
            v.push(if i == j { e } else { e * r2 });
        }
    }
    DVector::from_vec(v)
}

/// Inverse of [`svec`].
pub fn smat<T: Real>(v: &DVector<T>, n: usize) -> SymmetricMatrix<T> {
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let mut m = DMatrix::<T>::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, j)] = v[k];
            } else {
                m[(i, j)] = v[k] / r2;
                m[(j, i)] = v[k] / r2;
            }
            k += 1;
        }
    }
    Hermitian::symmetrized(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(256).unwrap()
    }

    #[test]
    fn covariance_extension_response_is_delay_vector() {
        let bank = FilterBank::<f64>::covariance_extension(4, 1, grid()).unwrap();
        for k in [0, 5, 100] {
            let t: f64 = grid().theta(k);
            let g = bank.response(k);
            for i in 0..4 {
                let p = -((4 - i) as f64);
                let expected = Complex::new((p * t).cos(), (p * t).sin());
                assert!((g[(i, 0)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn white_noise_state_covariance_is_identity_for_delays() {
        let bank = FilterBank::<f64>::covariance_extension(3, 2, grid()).unwrap();
        let id = SpectrumGrid::identity(grid(), 2);
        let s = bank.gamma_op(&id).unwrap();
        assert!((s.as_matrix() - DMatrix::<f64>::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_banks() {
        let g = grid();
        let unstable = DMatrix::from_row_slice(2, 2, &[1.0f64, 0.0, 0.0, 0.5]);
        let b = DMatrix::from_element(2, 1, 1.0f64);
        assert!(matches!(FilterBank::new(unstable, b.clone(), g), Err(Error::UnstableA { .. })));
        let diag = DMatrix::from_row_slice(2, 2, &[0.5f64, 0.0, 0.0, 0.5]);
        assert!(matches!(FilterBank::new(diag, b, g), Err(Error::NotReachable { .. })));
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.1f64, 0.2, 0.3]));
        let b2 = DMatrix::from_element(3, 2, 1.0f64);
        assert!(matches!(FilterBank::new(a, b2, g), Err(Error::RankDeficientB { .. })));
    }

    #[test]
    fn pole_state_matrix_blocks() {
        let p = [Complex::new(0.0, 0.0), Complex::new(0.3, 0.4), Complex::new(0.3, -0.4)];
        let a = pole_state_matrix(&p).unwrap();
        assert_eq!(a.nrows(), 3);
        let mut ev: Vec<_> = a.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        ev.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
        assert!((ev[0].1 + 0.4).abs() < 1e-12 && (ev[2].1 - 0.4).abs() < 1e-12);
        assert!(pole_state_matrix(&[Complex::new(0.3, 0.4)]).is_err());
    }

    #[test]
    fn svec_round_trip_and_inner_product() {
        let x = Hermitian::new(DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0])).unwrap();
        let y = Hermitian::new(DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0])).unwrap();
        assert!((smat(&svec(&x), 3).as_matrix() - x.as_matrix()).norm() < 1e-14);
        let diff: f64 = svec(&x).dot(&svec(&y)) - x.inner(&y);
        assert!(diff.abs() < 1e-12);
    }

    #[test]
    fn stein_residual() {
        let bank = FilterBank::<f64>::pole_bank(&[Complex::new(0.5, 0.0), Complex::new(-0.3, 0.0)], 1, grid()).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = bank.stein_solve(&q).unwrap();
        let r = &p - bank.a() * &p * bank.a().transpose() - &q;
        assert!(r.norm() < 1e-13);
    }
}
