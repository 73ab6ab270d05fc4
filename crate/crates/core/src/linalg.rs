//! Dense linear-algebra helpers: matrix exponential, symmetric spectral
//! utilities, and rank via singular values.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Computes `exp(t * m)` by scaling and squaring with diagonal Pade
/// approximants.  Accuracy is at the level of unit roundoff for well-scaled
/// inputs; in particular the relative error is below `1e-12` whenever
/// `||t * m||_1 <= 1`.
pub fn mat_exp(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !t.is_finite() || m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(
            "matrix exponential given a non-finite scalar or entry".to_string(),
        ));
    }
    let a = m * t;
    // Dimensions one and two have exact closed forms; besides speed, they
    // keep full accuracy at huge |t| where repeated squaring loses digits.
    match a.nrows() {
        1 => Ok(DMatrix::from_element(1, 1, a[(0, 0)].exp())),
        2 => Ok(expm_2x2(&a)),
        _ => Ok(expm(a)),
    }
}

// Cayley-Hamilton form for a 2x2 matrix: with s = tr/2 and A0 = A - sI
// (trace-free, eigenvalues +/- sqrt(delta), delta = -det A0),
// exp(A) = e^s (cosh(w) I + sinh(w)/w A0) where w^2 = delta; for delta < 0
// the hyperbolic pair becomes (cos, sin), and near zero a short series in
// delta avoids the 0/0.
fn expm_2x2(a: &DMatrix<f64>) -> DMatrix<f64> {
    let s = 0.5 * (a[(0, 0)] + a[(1, 1)]);
    let d = a[(0, 0)] - s;
    let delta = d * d + a[(0, 1)] * a[(1, 0)];
    let (ch, shw) = if delta > 1e-24 {
        let w = delta.sqrt();
        (w.cosh(), w.sinh() / w)
    } else if delta < -1e-24 {
        let w = (-delta).sqrt();
        (w.cos(), w.sin() / w)
    } else {
        (
            1.0 + delta * (0.5 + delta / 24.0),
            1.0 + delta * (1.0 / 6.0 + delta / 120.0),
        )
    };
    let es = s.exp();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            es * (ch + shw * d),
            es * shw * a[(0, 1)],
            es * shw * a[(1, 0)],
            es * (ch - shw * d),
        ],
    )
}

// Pade orders 3..13 with the L1-norm thresholds of the scaling-and-squaring
// method; below each threshold the corresponding approximant already attains
// unit-roundoff accuracy.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068e0;
const THETA_13: f64 = 5.371_920_351_148_152e0;

fn expm(a: DMatrix<f64>) -> DMatrix<f64> {
    let norm = l1_norm(&a);
    let a2 = &a * &a;
    if norm < THETA_3 {
        return pade_3(&a, &a2);
    }
    let a4 = &a2 * &a2;
    if norm < THETA_5 {
        return pade_5(&a, &a2, &a4);
    }
    let a6 = &a2 * &a4;
    if norm < THETA_7 {
        return pade_7(&a, &a2, &a4, &a6);
    }
    if norm < THETA_9 {
        let a8 = &a4 * &a4;
        return pade_9(&a, &a2, &a4, &a6, &a8);
    }
    // Scale so the norm drops below the order-13 threshold, then square back.
    let squarings = if norm <= THETA_13 {
        0
    } else {
        (norm / THETA_13).log2().ceil() as i32
    };
    let scale = 0.5f64.powi(squarings);
    let a = a * scale;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let mut e = pade_13(&a, &a2, &a4, &a6);
    for _ in 0..squarings {
        e = &e * &e;
    }
    e
}

fn l1_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum())
        .fold(0.0, f64::max)
}

/// Forms `(-u + v)^{-1} (u + v)`, the shared final step of every Pade order.
fn pade_solve(u: DMatrix<f64>, v: DMatrix<f64>) -> DMatrix<f64> {
    let numer = &u + &v;
    let denom = v - u;
    denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is singular; input matrix is pathological")
}

fn pade_3(a: &DMatrix<f64>, a2: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, b) = (a.nrows(), [120.0, 60.0, 12.0, 1.0]);
    let id = DMatrix::identity(n, n);
    let u = a * (a2 * b[3] + &id * b[1]);
    let v = a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

fn pade_5(a: &DMatrix<f64>, a2: &DMatrix<f64>, a4: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, b) = (a.nrows(), [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]);
    let id = DMatrix::identity(n, n);
    let u = a * (a4 * b[5] + a2 * b[3] + &id * b[1]);
    let v = a4 * b[4] + a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

fn pade_7(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
) -> DMatrix<f64> {
    let b = [
        17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
    ];
    let id = DMatrix::identity(a.nrows(), a.nrows());
    let u = a * (a6 * b[7] + a4 * b[5] + a2 * b[3] + &id * b[1]);
    let v = a6 * b[6] + a4 * b[4] + a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

fn pade_9(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
    a8: &DMatrix<f64>,
) -> DMatrix<f64> {
    let b = [
        17643225600.0,
        8821612800.0,
        2075673600.0,
        302702400.0,
        30270240.0,
        2162160.0,
        110880.0,
        3960.0,
        90.0,
        1.0,
    ];
    let id = DMatrix::identity(a.nrows(), a.nrows());
    let u = a * (a8 * b[9] + a6 * b[7] + a4 * b[5] + a2 * b[3] + &id * b[1]);
    let v = a8 * b[8] + a6 * b[6] + a4 * b[4] + a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

fn pade_13(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    a4: &DMatrix<f64>,
    a6: &DMatrix<f64>,
) -> DMatrix<f64> {
    let b = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = DMatrix::identity(a.nrows(), a.nrows());
    let w = a6 * b[13] + a4 * b[11] + a2 * b[9];
    let u = a * (a6 * &w + a6 * b[7] + a4 * b[5] + a2 * b[3] + &id * b[1]);
    let w2 = a6 * b[12] + a4 * b[10] + a2 * b[8];
    let v = a6 * w2 + a6 * b[6] + a4 * b[4] + a2 * b[2] + &id * b[0];
    pade_solve(u, v)
}

/// Eigenvalue range of a symmetric matrix.  The input is symmetrized first so
/// that roundoff-level asymmetry cannot poison the solver.
pub fn sym_eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    (lo, hi)
}

pub fn sym_eigen_min(m: &DMatrix<f64>) -> f64 {
    sym_eigen_range(m).0
}

pub fn sym_eigen_max(m: &DMatrix<f64>) -> f64 {
    sym_eigen_range(m).1
}

/// Symmetric square root of a positive semidefinite matrix via spectral
/// decomposition.  Eigenvalues in `[-clamp_tol, 0)` are treated as roundoff
/// and clamped to zero; anything below `-clamp_tol` is an error.
pub fn sqrt_psd(m: &DMatrix<f64>, clamp_tol: f64) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -clamp_tol {
            return Err(Error::invalid(format!(
                "matrix has negative eigenvalue {v:.3e}, not positive semidefinite"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    let root = &q * DMatrix::from_diagonal(&vals) * q.transpose();
    Ok((&root + root.transpose()) * 0.5)
}

/// Numerical rank from singular values with threshold
/// `max(nrows, ncols) * sigma_max * rel_tol`.
pub fn rank_with_tol(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let max_dim = m.nrows().max(m.ncols()) as f64;
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::numeric("SVD failed to converge".to_string()))?;
    let sv = svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |acc, &s| acc.max(s));
    let tol = max_dim * smax * rel_tol;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Max absolute entry of the difference of two equally sized matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Solves `L w = v` for lower-triangular `L` and returns `w`.
pub fn solve_lower(l: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(v)
        .expect("lower-triangular solve hit a zero pivot")
}

/// Solves `L W = V` columnwise for lower-triangular `L`, failing on a zero
/// pivot instead of panicking (callers feed it Cholesky factors whose
/// positivity was already certified, so a zero pivot is a numeric fault).
pub fn solve_lower_matrix(l: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    l.solve_lower_triangular(v)
        .ok_or_else(|| Error::numeric("lower-triangular matrix solve hit a zero pivot".to_string()))
}
