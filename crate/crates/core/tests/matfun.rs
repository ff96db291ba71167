mod common;

use betaspec::matfun::{frechet_exp, frechet_log, frechet_power, gen_log_discrepancy, herm_power, matrix_exp, matrix_log};
use betaspec::{Error, HermitianMatrix, SymmetricMatrix};
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn powers_agree_with_jacobi_oracle() {
    let mut r = rng(1);
    for n in 1..=4 {
        for &c in &[-2.0, -1.0, -0.5, 1.0 / 3.0, 0.5, 1.7] {
            let h = random_hermitian_pd(n, &mut r, 0.3);
            let got = herm_power(&h, c).unwrap();
            let want = hermitian_function(h.as_matrix(), |x| x.powf(c));
            assert!(cdiff(got.as_matrix(), &want) < 1e-10 * want.norm(), "n={n} c={c}");
        }
    }
}

#[test]
fn log_and_exp_agree_with_jacobi_oracle() {
    let mut r = rng(2);
    for n in 1..=4 {
        let h = random_hermitian_pd(n, &mut r, 0.2);
        let want = hermitian_function(h.as_matrix(), f64::ln);
        assert!(cdiff(matrix_log(&h).unwrap().as_matrix(), &want) < 1e-10);
        let y = random_hermitian(n, &mut r, 1.0);
        let want = hermitian_function(y.as_matrix(), f64::exp);
        assert!(cdiff(matrix_exp(&y).as_matrix(), &want) < 1e-10 * want.norm());
    }
}

#[test]
fn real_symmetric_powers_agree_with_oracle() {
    let mut r = rng(3);
    let s = random_spd(5, &mut r, 0.1);
    let got = herm_power(&s, -0.25).unwrap();
    let want = matrix_power_oracle(s.as_matrix(), -0.25);
    assert!((got.as_matrix() - &want).norm() < 1e-10 * want.norm());
}

/// `f(X + hΔ)` differenced numerically against the closed-form Fréchet derivative.
fn check_frechet(
    x: &HermitianMatrix<f64>,
    d: &HermitianMatrix<f64>,
    f: impl Fn(&HermitianMatrix<f64>) -> DMatrix<Complex64>,
    got: &DMatrix<Complex64>,
) {
    let h = 1e-5;
    let plus = f(&x.add(&d.scale(h)));
    let minus = f(&x.add(&d.scale(-h)));
    let fd = (plus - minus) / Complex64::new(2.0 * h, 0.0);
    assert!(cdiff(&fd, got) < 1e-6 * fd.norm().max(1.0), "{} vs {}", fd, got);
}

#[test]
fn frechet_derivatives_match_finite_differences() {
    let mut r = rng(4);
    for n in [1, 2, 3] {
        let x = random_hermitian_pd(n, &mut r, 0.5);
        let d = random_hermitian(n, &mut r, 1.0);
        for &c in &[-1.0, -0.5, 2.0, 1.0 / 3.0] {
            let got = frechet_power(&x, c, &d).unwrap();
            check_frechet(&x, &d, |y| hermitian_function(y.as_matrix(), |t| t.powf(c)), got.as_matrix());
        }
        let got = frechet_log(&x, &d).unwrap();
        check_frechet(&x, &d, |y| hermitian_function(y.as_matrix(), f64::ln), got.as_matrix());
        let y = random_hermitian(n, &mut r, 0.7);
        let got = frechet_exp(&y, &d).unwrap();
        check_frechet(&y, &d, |z| hermitian_function(z.as_matrix(), f64::exp), got.as_matrix());
    }
}

#[test]
fn frechet_handles_repeated_eigenvalues() {
    let x = SymmetricMatrix::<f64>::identity(3).scale(2.0).to_complex();
    let d = random_hermitian(3, &mut rng(5), 1.0);
    // At a multiple of the identity, D f(X)[Δ] = f'(2) Δ.
    let got = frechet_power(&x, -0.5, &d).unwrap();
    let want = d.as_matrix() * Complex64::new(-0.5 * 2f64.powf(-1.5), 0.0);
    assert!(cdiff(got.as_matrix(), &want) < 1e-12);
}

#[test]
fn discrepancy_vanishes_at_equal_arguments() {
    let x = random_hermitian_pd(3, &mut rng(6), 0.5);
    for &c in &[-1.0, 0.0, 0.5, 2.0] {
        let d = gen_log_discrepancy(&x, &x, c).unwrap();
        assert!(d.norm() < 1e-10, "c={c}: {}", d.norm());
    }
}

#[test]
fn indefinite_input_is_rejected() {
    let x = SymmetricMatrix::<f64>::from_real_diagonal(&[1.0, -1e-3]);
    assert!(matches!(herm_power(&x, 0.5), Err(Error::NotPositiveDefinite { .. })));
    assert!(matches!(matrix_log(&x), Err(Error::NotPositiveDefinite { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_laws(seed in 0u64..10_000, n in 1usize..5, a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let x = random_hermitian_pd(n, &mut rng(seed), 0.3);
        let xa = herm_power(&x, a).unwrap();
        let xb = herm_power(&x, b).unwrap();
        let xab = herm_power(&x, a + b).unwrap();
        let prod = xa.as_matrix() * xb.as_matrix();
        prop_assert!(cdiff(&prod, xab.as_matrix()) < 1e-9 * xab.norm().max(1.0));
    }

    #[test]
    fn exp_inverts_log(seed in 0u64..10_000, n in 1usize..5) {
        let x = random_hermitian_pd(n, &mut rng(seed), 0.2);
        let back = matrix_exp(&matrix_log(&x).unwrap());
        prop_assert!(cdiff(back.as_matrix(), x.as_matrix()) < 1e-10 * x.norm());
    }

    #[test]
    fn power_preserves_hermitian_pd(seed in 0u64..10_000, n in 1usize..5, c in -3.0f64..3.0) {
        let x = random_hermitian_pd(n, &mut rng(seed), 0.3);
        let y = herm_power(&x, c).unwrap();
        prop_assert!(cdiff(y.as_matrix(), &y.as_matrix().adjoint()) < 1e-12 * y.norm());
        prop_assert!(y.is_positive_definite());
    }
}
