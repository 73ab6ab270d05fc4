//! Operator pairs `(A, B)`, the Kalman rank condition, and drift spectrum
//! classification.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg;

/// Entrywise tolerance for symmetry of the diffusion matrix.
const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues of `A` above this negative floor are clamped to zero.
const PSD_CLAMP_TOL: f64 = 1e-10;
/// Relative singular-value threshold for the Kalman rank decision.
const KALMAN_RANK_TOL: f64 = 1e-12;
/// Real parts below this magnitude count as zero when classifying the
/// drift spectrum.
const SPECTRUM_REAL_TOL: f64 = 1e-9;

/// A validated operator pair defining `L u = tr(A D^2 u) + <B x, D u>`.
///
/// Construction checks that `A` is symmetric positive semidefinite and
/// precomputes its symmetric square root together with the Kalman index.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    name: String,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sqrt_a: DMatrix<f64>,
    kalman: KalmanReport,
}

/// Outcome of the Kalman rank test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KalmanReport {
    /// True when the chain `[sqrt(A), B sqrt(A), ..., B^k sqrt(A)]` reaches
    /// full rank for some `k <= N - 1`.
    pub hypoelliptic: bool,
    /// Smallest such `k`, when it exists.
    pub index: Option<usize>,
}

/// Coarse classification of the drift spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralClass {
    /// Every eigenvalue of `B` is purely imaginary (real part within
    /// tolerance of zero).
    AllImaginary,
    /// All real parts are nonpositive and at least one is strictly negative.
    AllNonpositiveReal,
    /// Some eigenvalue has strictly positive real part.
    HasPositiveReal,
}

/// Spectrum report combining eigenvalues, class, and the Kalman test.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex<f64>>,
    pub class: SpectralClass,
    /// Whether bounded ancient solutions are forced constant: true unless
    /// some drift eigenvalue has positive real part.
    pub linf_liouville: bool,
    pub kalman: KalmanReport,
}

impl OperatorSpec {
    /// Validates and freezes an operator pair.
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let name = name.into();
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::invalid(format!(
                "diffusion matrix of '{name}' must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() != n {
            return Err(Error::invalid(format!(
                "drift matrix of '{name}' must be {n}x{n}, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "operator '{name}' has non-finite matrix entries"
            )));
        }
        let asym = linalg::max_abs_diff(&a, &a.transpose());
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "diffusion matrix of '{name}' is asymmetric by {asym:.3e}"
            )));
        }
        let sqrt_a = linalg::sqrt_psd(&a, PSD_CLAMP_TOL).map_err(|_| {
            Error::invalid(format!(
                "diffusion matrix of '{name}' is not positive semidefinite"
            ))
        })?;
        let kalman = kalman_from_parts(&b, &sqrt_a)?;
        Ok(OperatorSpec {
            name,
            a,
            b,
            sqrt_a,
            kalman,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// State dimension `N`.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sqrt_a(&self) -> &DMatrix<f64> {
        &self.sqrt_a
    }

    pub fn kalman(&self) -> KalmanReport {
        self.kalman
    }

    pub fn is_hypoelliptic(&self) -> bool {
        self.kalman.hypoelliptic
    }

    /// The same diffusion with drift `-B`; swaps the roles of the two
    /// covariance families.
    pub fn with_negated_drift(&self) -> OperatorSpec {
        OperatorSpec::new(format!("{}~reversed", self.name), self.a.clone(), -&self.b)
            .expect("negating the drift preserves validity")
    }

    /// Propagator `E(s) = exp(-s B)`.
    pub fn propagator(&self, s: f64) -> Result<DMatrix<f64>> {
        linalg::mat_exp(&self.b, -s)
    }
}

/// Runs the Kalman rank test for the pair `(A, B)`.
///
/// The index is the smallest `k` for which the horizontally stacked chain
/// `[sqrt(A), B sqrt(A), ..., B^k sqrt(A)]` has full row rank; ranks are
/// decided from singular values with threshold
/// `max(rows, cols) * sigma_max * 1e-12`.
pub fn kalman_index(spec: &OperatorSpec) -> KalmanReport {
    spec.kalman
}

fn kalman_from_parts(b: &DMatrix<f64>, sqrt_a: &DMatrix<f64>) -> Result<KalmanReport> {
    let n = b.nrows();
    let mut blocks: Vec<DMatrix<f64>> = vec![sqrt_a.clone()];
    for k in 0..n {
        let chain = hstack(&blocks);
        let rank = linalg::rank_with_tol(&chain, KALMAN_RANK_TOL)?;
        if rank == n {
            return Ok(KalmanReport {
                hypoelliptic: true,
                index: Some(k),
            });
        }
        blocks.push(b * blocks.last().unwrap());
    }
    Ok(KalmanReport {
        hypoelliptic: false,
        index: None,
    })
}

fn hstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = blocks[0].nrows();
    let total = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(n, total);
    let mut col = 0;
    for b in blocks {
        out.view_mut((0, col), (n, b.ncols())).copy_from(b);
        col += b.ncols();
    }
    out
}

/// Computes drift eigenvalues and classifies the spectrum.
pub fn classify_spectrum(spec: &OperatorSpec) -> Result<SpectrumReport> {
    // The QR iteration normalizes by the largest entry, so the zero drift
    // must be handled before it (0/0 poisons the iteration with NaN).
    let eigenvalues: Vec<Complex<f64>> = if spec.b().amax() == 0.0 {
        vec![Complex::new(0.0, 0.0); spec.dim()]
    } else {
        let b = spec.b().clone();
        let schur = nalgebra::linalg::Schur::try_new(b, f64::EPSILON, 10_000).ok_or_else(|| {
            Error::numeric(format!(
                "Schur iteration failed for drift of '{}': {:?}",
                spec.name(),
                spec.b()
            ))
        })?;
        schur.complex_eigenvalues().iter().copied().collect()
    };
    let max_re = eigenvalues
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_abs_re = eigenvalues.iter().map(|l| l.re.abs()).fold(0.0, f64::max);
    let class = if max_abs_re <= SPECTRUM_REAL_TOL {
        SpectralClass::AllImaginary
    } else if max_re <= SPECTRUM_REAL_TOL {
        SpectralClass::AllNonpositiveReal
    } else {
        SpectralClass::HasPositiveReal
    };
    Ok(SpectrumReport {
        eigenvalues,
        class,
        linf_liouville: class != SpectralClass::HasPositiveReal,
        kalman: spec.kalman(),
    })
}
