//! Independent numerical oracles shared by the integration tests. Nothing in
//! here calls into the crate's numerical routines.
#![allow(dead_code)]

use std::f64::consts::PI;

use betaspec::{FrequencyGrid, HermitianMatrix, SpectrumGrid, SymmetricMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cyclic Jacobi eigensolver for a real symmetric matrix given as rows.
/// Returns eigenvalues and eigenvectors (as columns).
#[allow(clippy::needless_range_loop)]
pub fn jacobi(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// `f(H)` for a Hermitian `H` through the real `2n × 2n` embedding
/// `[[Re, -Im], [Im, Re]]` and the Jacobi oracle.
pub fn hermitian_function(h: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let n = h.nrows();
    let mut e = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let z = h[(i, j)];
            e[i][j] = z.re;
            e[i + n][j + n] = z.re;
            e[i][j + n] = -z.im;
            e[i + n][j] = z.im;
        }
    }
    let (d, v) = jacobi(&e);
    let mut fe = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..2 * n {
        for j in 0..2 * n {
            fe[i][j] = (0..2 * n).map(|k| v[i][k] * f(d[k]) * v[j][k]).sum();
        }
    }
    DMatrix::from_fn(n, n, |i, j| Complex64::new(fe[i][j], fe[i + n][j]))
}

pub fn real_function(s: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = s.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| s[(i, j)]).collect()).collect();
    let (d, v) = jacobi(&rows);
    DMatrix::from_fn(n, n, |i, j| (0..n).map(|k| v[i][k] * f(d[k]) * v[j][k]).sum())
}

pub fn real_eigenvalues(s: &DMatrix<f64>) -> Vec<f64> {
    let n = s.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| s[(i, j)]).collect()).collect();
    let mut d = jacobi(&rows).0;
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

pub fn random_spd(n: usize, r: &mut impl Rng, floor: f64) -> SymmetricMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
    SymmetricMatrix::new(&x * x.transpose() + DMatrix::identity(n, n) * floor).unwrap()
}

pub fn random_symmetric(n: usize, r: &mut impl Rng, scale: f64) -> SymmetricMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| r.random_range(-scale..scale));
    SymmetricMatrix::new((&x + x.transpose()) * 0.5).unwrap()
}

pub fn random_hermitian(n: usize, r: &mut impl Rng, scale: f64) -> HermitianMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(r.random_range(-scale..scale), r.random_range(-scale..scale))
    });
    HermitianMatrix::new((&x + x.adjoint()).scale(0.5)).unwrap()
}

pub fn random_hermitian_pd(n: usize, r: &mut impl Rng, floor: f64) -> HermitianMatrix<f64> {
    let x = DMatrix::from_fn(n, n, |_, _| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
    HermitianMatrix::new(&x * x.adjoint() + DMatrix::identity(n, n).map(|v: f64| Complex64::new(v * floor, 0.0)))
        .unwrap()
}

/// Coefficients of a random `m × m` matrix polynomial `W(z) = Σ_k W_k z^{-k}`.
#[derive(Clone, Debug)]
pub struct MatrixPolynomial {
    pub coeffs: Vec<DMatrix<f64>>,
    pub floor: f64,
}

impl MatrixPolynomial {
    pub fn random(m: usize, degree: usize, floor: f64, r: &mut impl Rng) -> Self {
        let coeffs = (0..=degree)
            .map(|_| DMatrix::from_fn(m, m, |_, _| r.random_range(-1.0..1.0)))
            .collect();
        Self { coeffs, floor }
    }

    /// `W(e^{jθ}) W(e^{jθ})* + floor · I`, coercive by construction.
    pub fn eval(&self, theta: f64) -> DMatrix<Complex64> {
        let m = self.coeffs[0].nrows();
        let mut w = DMatrix::<Complex64>::zeros(m, m);
        for (k, c) in self.coeffs.iter().enumerate() {
            let z = Complex64::from_polar(1.0, -(k as f64) * theta);
            w += c.map(|x| Complex64::new(x, 0.0)) * z;
        }
        &w * w.adjoint() + DMatrix::identity(m, m).map(|v: f64| Complex64::new(v * self.floor, 0.0))
    }

    pub fn spectrum(&self, grid: FrequencyGrid) -> SpectrumGrid<f64> {
        let m = self.coeffs[0].nrows();
        SpectrumGrid::from_fn(grid, m, |t: f64| self.eval(t)).unwrap()
    }
}

/// Composite Simpson rule of the normalized integral `(1/2π) ∫_{-π}^{π} f`.
pub fn simpson(f: impl Fn(f64) -> f64, intervals: usize) -> f64 {
    assert!(intervals.is_multiple_of(2));
    let h = 2.0 * PI / intervals as f64;
    let mut acc = f(-PI) + f(PI);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(-PI + i as f64 * h);
    }
    acc * h / 3.0 / (2.0 * PI)
}

/// Scalar Beta divergence `d_β(x‖y)` with its two limits.
pub fn scalar_beta(x: f64, y: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        x / y - (x / y).ln() - 1.0
    } else if beta == 1.0 {
        x * (x / y).ln() - x + y
    } else {
        (x.powf(beta) - x * y.powf(beta - 1.0)) / (beta - 1.0) - (x.powf(beta) - y.powf(beta)) / beta
    }
}

/// `Σ_k A^k Q A^kᵀ`, summed until the terms are negligible.
pub fn lyapunov_series(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut acc = q.clone();
    let mut term = q.clone();
    for _ in 0..100_000 {
        term = a * &term * a.transpose();
        acc += &term;
        if term.norm() < 1e-17 * acc.norm() {
            break;
        }
    }
    acc
}

/// Levinson-Durbin recursion: lags `c_0..c_p` to monic AR coefficients
/// `[1, a_1, ..., a_p]` and the innovation variance.
pub fn levinson(c: &[f64]) -> (Vec<f64>, f64) {
    let p = c.len() - 1;
    let mut a = vec![1.0];
    let mut e = c[0];
    for k in 1..=p {
        let acc: f64 = (0..k).map(|i| a[i] * c[k - i]).sum();
        let kappa = -acc / e;
        let mut next = a.clone();
        next.push(0.0);
        for i in 1..=k {
            next[i] = a.get(i).copied().unwrap_or(0.0) + kappa * a[k - i];
        }
        a = next;
        e *= 1.0 - kappa * kappa;
    }
    (a, e)
}

/// Central finite difference of a scalar function along a direction.
pub fn central_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Second central difference `(f(h) - 2 f(0) + f(-h)) / h²`.
pub fn second_difference(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h)
}

pub fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn matrix_power_oracle(s: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    real_function(s, |x| x.powf(c))
}

/// `‖A‖_F` of the difference of two complex matrices.
pub fn cdiff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm()
}
