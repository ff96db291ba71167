//! Multivariate spectral estimation with the Beta divergence family.
//!
//! Modules, bottom up:
//!
//! * [`matfun`]: fractional powers, logarithm, exponential and their Fréchet
//!   derivatives for Hermitian positive definite matrices.
//! * [`spectra`]: spectral densities sampled on the unit circle and the
//!   Itakura-Saito / Kullback-Leibler / Beta divergences between them.
//! * [`filterbank`]: the rational filter bank `G(z) = (zI - A)^{-1} B`, its
//!   moment operator and the subspace of feasible state covariances.
//! * [`covfit`]: structured covariance estimation under the Beta matrix divergence.
//! * [`spectapprox`]: the dual Newton solver for the spectrum approximation problem.
//! * [`simlab`]: simulation studies (ARMA, bandpass processes, data-driven pipeline).
//!
//! All numerical modules are generic over the scalar type through [`Real`];
//! the `*64` aliases below fix it to `f64`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covfit;
pub mod error;
pub mod filterbank;
pub mod matfun;
pub mod newton;
pub mod scalar;
pub mod simlab;
pub mod spectapprox;
pub mod spectra;

pub use error::{Error, Result};
pub use scalar::{Field, Real};

pub use covfit::{CovDualPoint, CovFitResult};
pub use filterbank::{FilterBank, RangeGammaBasis};
pub use matfun::{Hermitian, HermitianMatrix, SpectralDecomposition, SymmetricMatrix};
pub use newton::{IterationRecord, NewtonOptions};
pub use spectapprox::{Multiplier, SolverReport, Solution};
pub use spectra::{FrequencyGrid, RationalScalarFactor, SpectrumGrid};

pub type HermitianMatrix64 = HermitianMatrix<f64>;
pub type SymmetricMatrix64 = SymmetricMatrix<f64>;
pub type SpectrumGrid64 = SpectrumGrid<f64>;
pub type FilterBank64 = FilterBank<f64>;
pub type RangeGammaBasis64 = RangeGammaBasis<f64>;
pub type CovFitResult64 = CovFitResult<f64>;
pub type Solution64 = Solution<f64>;

pub type HermitianMatrix32 = HermitianMatrix<f32>;
pub type SymmetricMatrix32 = SymmetricMatrix<f32>;
pub type SpectrumGrid32 = SpectrumGrid<f32>;
pub type FilterBank32 = FilterBank<f32>;
