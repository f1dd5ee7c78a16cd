//! High-precision spectral solver for the one-dimensional Dirac and
//! Klein-Gordon oscillators.
//!
//! Levels are obtained from the quartic PT-symmetric Titchmarsh operator
//! `-d^2/dx^2 - 2i sqrt(Omega) x + (1 + 2 E Omega) x^2 - Omega x^4` whose
//! eigenvalues `lambda_n(E)` close the implicit relation
//! `lambda_n(E) = E + Omega E^2`. Eigenvalues are found as zeros of the
//! determinant of a block matrix-moment polynomial in a scaled oscillator
//! basis, all in MPFR arithmetic.

pub mod error;
pub mod scalars;
pub mod linalg;
pub mod hermite_basis;
pub mod operator_builder;
pub mod moment_solver;
pub mod level_solver;
pub mod diagnostics;
pub mod cli;

pub use error::{Error, Result};
pub use scalars::{make_context, HpComplex, HpReal, PrecisionContext};
