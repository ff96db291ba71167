//! Matrix functions on Hermitian (complex) and symmetric (real) matrices.
//!
//! Every function goes through the spectral decomposition `X = U diag(d) U*`.
//! Fréchet derivatives use the Daleckii-Krein form
//! `Df(X)[Δ] = U (f[d_i, d_j] ∘ (U* Δ U)) U*`, where `f[a, b]` is the first
//! divided difference of the scalar function.

use nalgebra::{ComplexField, DMatrix, DVector, RealField};
use num_traits::{One, Zero};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{Field, Real};

type Re<F> = <F as ComplexField>::RealField;

/// Relative eigenvalue floor below which a matrix is not positive definite.
pub const EIG_FLOOR: f64 = 1e-12;

/// Relative gap below which a divided difference falls back to the derivative.
pub const DIVIDED_DIFFERENCE_GAP: f64 = 1e-8;

/// Dense Hermitian matrix. Symmetry is exact: every constructor projects its
/// input onto the Hermitian part.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian<F: Field> {
    mat: DMatrix<F>,
}

/// Complex Hermitian `m × m` matrix (pointwise spectral density values).
pub type HermitianMatrix<T> = Hermitian<Complex<T>>;
/// Real symmetric `n × n` matrix (covariances, multipliers).
pub type SymmetricMatrix<T> = Hermitian<T>;

impl<F: Field> Hermitian<F> {
    /// Wraps `(M + M*) / 2`.
    pub fn new(m: DMatrix<F>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Builds the matrix from the upper triangle of `m`; the strict lower
    /// triangle is ignored and the diagonal's imaginary part dropped.
    pub fn from_upper(m: &DMatrix<F>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut out = m.clone();
        for j in 0..n {
            out[(j, j)] = F::from_real(m[(j, j)].real());
            for i in 0..j {
                out[(j, i)] = m[(i, j)].conjugate();
            }
        }
        Ok(Self { mat: out })
    }

    pub(crate) fn symmetrized(m: DMatrix<F>) -> Self {
        let half = F::from_real(Re::<F>::lit(0.5));
        let adj = m.adjoint();
        Self {
            mat: (m + adj) * half,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            mat: DMatrix::zeros(n, n),
        }
    }

    pub fn from_real_diagonal(d: &[Re<F>]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| F::from_real(x)));
        Self {
            mat: DMatrix::from_diagonal(&v),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<F> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<F> {
        self.mat
    }

    /// `Re tr(X Y)`, the inner product on Hermitian matrices.
    pub fn inner(&self, other: &Self) -> Re<F> {
        inner_product(&self.mat, &other.mat)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> Re<F> {
        self.mat.norm()
    }

    pub fn trace(&self) -> Re<F> {
        self.mat.trace().real()
    }

    pub fn scale(&self, s: Re<F>) -> Self {
        Self {
            mat: &self.mat * F::from_real(s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    /// Spectral decomposition with eigenvalues sorted descending.
    pub fn eigh(&self) -> SpectralDecomposition<F> {
        SpectralDecomposition::of(self)
    }

    pub fn min_eigenvalue(&self) -> Re<F> {
        self.eigh().min()
    }

    pub fn max_eigenvalue(&self) -> Re<F> {
        self.eigh().max()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigh().check_positive_definite().is_ok()
    }
}

impl<T: Real> Hermitian<T> {
    /// Embeds a real symmetric matrix into the complex Hermitian matrices.
    pub fn to_complex(&self) -> HermitianMatrix<T> {
        Hermitian {
            mat: self.mat.map(|x| Complex::new(x, T::zero())),
        }
    }
}

impl<T: Real> Hermitian<Complex<T>> {
    /// Entrywise conjugate (equivalently the transpose).
    pub fn conj(&self) -> Self {
        Self {
            mat: self.mat.map(|z| z.conj()),
        }
    }

    /// Real part, as a real symmetric matrix.
    pub fn real_part(&self) -> SymmetricMatrix<T> {
        Hermitian {
            mat: self.mat.map(|z| z.re),
        }
    }
}

/// `Re tr(X Y)` for equally sized square matrices.
pub(crate) fn inner_product<F: Field>(x: &DMatrix<F>, y: &DMatrix<F>) -> Re<F> {
    let n = x.nrows();
    let mut acc = Re::<F>::zero();
    for i in 0..n {
        for j in 0..n {
            acc += (x[(i, j)] * y[(j, i)]).real();
        }
    }
    acc
}

/// `X = U diag(d) U*` with `d` sorted descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition<F: Field> {
    pub u: DMatrix<F>,
    pub d: DVector<Re<F>>,
}

impl<F: Field> SpectralDecomposition<F> {
    pub fn of(x: &Hermitian<F>) -> Self {
        let n = x.dim();
        let eig = x.mat.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let d = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut u = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            // Fix the eigenvector phase: first non-negligible component real positive.
            let scale = v.iter().map(|z| z.modulus()).fold(Re::<F>::zero(), RealField::max);
            let pivot = v
                .iter()
                .find(|z| z.modulus() > scale * Re::<F>::lit(1e-8))
                .copied()
                .unwrap_or_else(F::one);
            let phase = pivot.conjugate().unscale(pivot.modulus());
            for i in 0..n {
                u[(i, col)] = v[i] * phase;
            }
        }
        Self { u, d }
    }

    pub fn min(&self) -> Re<F> {
        self.d[self.d.len() - 1]
    }

    pub fn max(&self) -> Re<F> {
        self.d[0]
    }

    /// Fails unless the smallest eigenvalue exceeds `EIG_FLOOR` times the largest.
    pub fn check_positive_definite(&self) -> Result<()> {
        let max = self.max();
        let min = self.min();
        if max <= Re::<F>::zero() || min <= max * Re::<F>::lit(EIG_FLOOR) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min.as_f64(),
                index: None,
            });
        }
        Ok(())
    }

    /// `U diag(f(d)) U*`.
    pub fn apply(&self, f: impl Fn(Re<F>) -> Re<F>) -> Hermitian<F> {
        let mut scaled = self.u.clone();
        for (j, &dj) in self.d.iter().enumerate() {
            let fj = F::from_real(f(dj));
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= fj);
        }
        Hermitian::symmetrized(scaled * self.u.adjoint())
    }

    pub fn reconstruct(&self) -> Hermitian<F> {
        self.apply(|x| x)
    }

    /// `U (K ∘ (U* Δ U)) U*` with `K_ij = kernel(d_i, d_j)`.
    pub fn frechet(&self, delta: &Hermitian<F>, kernel: impl Fn(Re<F>, Re<F>) -> Re<F>) -> Hermitian<F> {
        let mut w = self.u.adjoint() * &delta.mat * &self.u;
        let n = self.d.len();
        for j in 0..n {
            for i in 0..n {
                w[(i, j)] *= F::from_real(kernel(self.d[i], self.d[j]));
            }
        }
        Hermitian::symmetrized(&self.u * w * self.u.adjoint())
    }
}

fn positive_definite<F: Field>(x: &Hermitian<F>) -> Result<SpectralDecomposition<F>> {
    let dec = x.eigh();
    dec.check_positive_definite()?;
    Ok(dec)
}

fn check_same_dim<F: Field>(x: &Hermitian<F>, y: &Hermitian<F>) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!(
            "matrix sizes differ: {} vs {}",
            x.dim(),
            y.dim()
        )));
    }
    Ok(())
}

/// `X^c` for positive definite `X`.
pub fn herm_power<F: Field>(x: &Hermitian<F>, c: Re<F>) -> Result<Hermitian<F>> {
    Ok(positive_definite(x)?.apply(|d| d.powf(c)))
}

/// Principal matrix logarithm of a positive definite matrix.
pub fn matrix_log<F: Field>(x: &Hermitian<F>) -> Result<Hermitian<F>> {
    Ok(positive_definite(x)?.apply(|d| d.ln()))
}

/// Matrix exponential of a Hermitian matrix.
pub fn matrix_exp<F: Field>(y: &Hermitian<F>) -> Hermitian<F> {
    y.eigh().apply(|d| d.exp())
}

/// Generalized logarithm discrepancy `log_c(X, Y)`.
///
/// `(X^{1-c} Y^{c-1} - I) / (1 - c)` for `c != 1` and `log X - log Y` at
/// `c = 1`; the limit formula is also used when `|1 - c| < 1e-8`.
pub fn gen_log_discrepancy<F: Field>(x: &Hermitian<F>, y: &Hermitian<F>, c: Re<F>) -> Result<DMatrix<F>> {
    check_same_dim(x, y)?;
    let dx = positive_definite(x)?;
    let dy = positive_definite(y)?;
    let one = Re::<F>::one();
    let gap = one - c;
    if gap.abs() < Re::<F>::lit(1e-8) {
        let lx = dx.apply(|d| d.ln());
        let ly = dy.apply(|d| d.ln());
        return Ok(lx.mat - ly.mat);
    }
    let xp = dx.apply(|d| d.powf(gap));
    let yp = dy.apply(|d| d.powf(-gap));
    let n = x.dim();
    Ok((xp.mat * yp.mat - DMatrix::<F>::identity(n, n)) * F::from_real(one / gap))
}

fn near<R: Real>(a: R, b: R) -> bool {
    (a - b).abs() < R::lit(DIVIDED_DIFFERENCE_GAP) * a.abs().max(b.abs())
}

/// Divided difference of `t -> t^c` on positive reals.
pub(crate) fn power_divided_difference<R: Real>(a: R, b: R, c: R) -> R {
    if a == b || near(a, b) {
        let mid = (a + b) * R::lit(0.5);
        return c * mid.powf(c - R::one());
    }
    // (a^c - b^c) / (a - b) = b^{c-1} expm1(c r) / expm1(r), r = ln(a / b)
    let r = ((a - b) / b).ln_1p();
    b.powf(c - R::one()) * (c * r).exp_m1() / r.exp_m1()
}

pub(crate) fn exp_divided_difference<R: Real>(a: R, b: R) -> R {
    if a == b || near(a, b) {
        return ((a + b) * R::lit(0.5)).exp();
    }
    b.exp() * (a - b).exp_m1() / (a - b)
}

pub(crate) fn log_divided_difference<R: Real>(a: R, b: R) -> R {
    if a == b || near(a, b) {
        return R::lit(2.0) / (a + b);
    }
    ((a - b) / b).ln_1p() / (a - b)
}

/// Fréchet derivative of `X -> X^c` at `X` in direction `Δ`.
pub fn frechet_power<F: Field>(x: &Hermitian<F>, c: Re<F>, delta: &Hermitian<F>) -> Result<Hermitian<F>> {
    check_same_dim(x, delta)?;
    let dec = positive_definite(x)?;
    Ok(dec.frechet(delta, |a, b| power_divided_difference(a, b, c)))
}

/// Fréchet derivative of `Y -> e^Y` at `Y` in direction `Δ`.
pub fn frechet_exp<F: Field>(y: &Hermitian<F>, delta: &Hermitian<F>) -> Result<Hermitian<F>> {
    check_same_dim(y, delta)?;
    Ok(y.eigh().frechet(delta, exp_divided_difference))
}

/// Fréchet derivative of `X -> log X` at positive definite `X` in direction `Δ`.
pub fn frechet_log<F: Field>(x: &Hermitian<F>, delta: &Hermitian<F>) -> Result<Hermitian<F>> {
    check_same_dim(x, delta)?;
    let dec = positive_definite(x)?;
    Ok(dec.frechet(delta, log_divided_difference))
}
