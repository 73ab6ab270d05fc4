//! Numerical laboratory for degenerate Ornstein-Uhlenbeck evolution operators.
//!
//! The objects of study are second-order operators of the form
//!
//! ```text
//!     L u = tr(A D^2 u) + <B x, D u>,        K u = L u - d_t u,
//! ```
//!
//! with `A` symmetric positive semidefinite and `B` an arbitrary real drift
//! matrix.  When the pair `(A, B)` satisfies the Kalman rank condition the
//! evolution operator `K` is hypoelliptic and admits an explicit Gaussian
//! fundamental solution.  This crate computes the associated covariance
//! objects, Gaussian kernels, mean-value formulas and scaling constants, and
//! provides empirical verification routines for the structural properties
//! that hold when the drift spectrum is purely imaginary: volume doubling,
//! self-similarity of the covariance family, level-set containment, kernel
//! comparability, a Harnack-type bound on paraboloidal regions, and decay of
//! bounded-below ancient solutions.
//!
//! Module map:
//!
//! * [`operator`] -- operator pairs, matrix exponential, Kalman index and
//!   drift spectrum classification;
//! * [`covariance`] -- the covariance family `C(s)`, its drift-twisted
//!   companion `M(s)`, determinants and level-set volumes, with an
//!   independent quadrature oracle;
//! * [`constants`] -- empirical estimation of the growth, doubling and
//!   self-similarity constants and the derived containment radius chain;
//! * [`asymptotic`] -- canonical drift block structure, large-time limit
//!   projectors, and verification of the self-similar asymptotics;
//! * [`kernel`] -- fundamental solution, superlevel onions, mean-value
//!   kernels and the mean-value integral (deterministic and Monte Carlo);
//! * [`geometry`] -- paraboloidal neighborhoods, onion containment and
//!   kernel-ratio checks;
//! * [`harnack`] -- exact solution families, the Harnack constant chain, and
//!   the Harnack/decay verdicts;
//! * [`models`] -- bundled example operators used throughout the test suite.

// Guards written as `!(x > 0.0)` are deliberate: unlike `x <= 0.0` they also
// reject NaN, which must never slip past an input check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod constants;
pub mod covariance;
pub mod error;
pub mod geometry;
pub mod harnack;
pub mod jsonout;
pub mod kernel;
pub mod linalg;
pub mod models;
pub mod operator;
pub mod quadrature;
pub mod sample;

pub use error::{Error, Result};
pub use operator::OperatorSpec;
