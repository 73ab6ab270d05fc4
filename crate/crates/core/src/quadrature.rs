//! Quadrature and one-dimensional search utilities shared across modules:
//! Gauss-Legendre rules, adaptive Simpson integration for matrix-valued
//! integrands, golden-section maximization, and log-spaced grids.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Quadrature rule as parallel node and weight vectors.
pub type Rule = (Vec<f64>, Vec<f64>);

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed by Newton iteration on the Legendre polynomial and cached.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = compute_gauss_legendre(n);
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

fn compute_gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates a scalar function over `[a, b]` with a fixed `n`-point
/// Gauss-Legendre rule.
pub fn integrate_gl(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        total += w * f(mid + half * x);
    }
    total * half
}

/// Composite Gauss-Legendre rule: `panels` equal panels, `n` nodes each.
pub fn integrate_gl_composite(
    f: &mut dyn FnMut(f64) -> f64,
    a: f64,
    b: f64,
    n: usize,
    panels: usize,
) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut comp = 0.0; // Kahan compensation
    for k in 0..panels {
        let lo = a + h * k as f64;
        let y = integrate_gl(f, lo, lo + h, n) - comp;
        let t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    total
}

/// Composite Gauss-Legendre rule for matrix-valued integrands.
pub fn integrate_gl_composite_matrix(
    f: &mut dyn FnMut(f64) -> DMatrix<f64>,
    a: f64,
    b: f64,
    n: usize,
    panels: usize,
) -> DMatrix<f64> {
    let (nodes, weights) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let probe = f(a + 0.5 * h);
    let mut total = DMatrix::zeros(probe.nrows(), probe.ncols());
    for k in 0..panels {
        let mid = a + h * (k as f64 + 0.5);
        let half = 0.5 * h;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            total += f(mid + half * x) * (w * half);
        }
    }
    total
}

/// Maximum recursion depth of the adaptive Simpson scheme.
const SIMPSON_MAX_DEPTH: u32 = 40;

/// Adaptive Simpson integration of a matrix-valued integrand with an
/// entrywise absolute error target `tol`.  Returns an error when the depth
/// limit is reached before the local error estimate drops below target.
pub fn adaptive_simpson_matrix(
    f: &mut dyn FnMut(f64) -> DMatrix<f64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid(
            "Simpson tolerance must be positive".to_string(),
        ));
    }
    if !(b > a) {
        return Err(Error::invalid(format!(
            "Simpson interval must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson_rule(&fa, &fm, &fb, b - a);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 0)
}

fn simpson_rule(fa: &DMatrix<f64>, fm: &DMatrix<f64>, fb: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    (fa + fm * 4.0 + fb) * (h / 6.0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &mut dyn FnMut(f64) -> DMatrix<f64>,
    a: f64,
    b: f64,
    fa: DMatrix<f64>,
    fm: DMatrix<f64>,
    fb: DMatrix<f64>,
    whole: DMatrix<f64>,
    tol: f64,
    depth: u32,
) -> Result<DMatrix<f64>> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_rule(&fa, &flm, &fm, m - a);
    let right = simpson_rule(&fm, &frm, &fb, b - m);
    let refined = &left + &right;
    let err = (&refined - &whole).amax() / 15.0;
    if err <= tol {
        // Richardson tail of the two-panel estimate.
        return Ok(&refined + (refined.clone() - whole) / 15.0);
    }
    if depth >= SIMPSON_MAX_DEPTH {
        return Err(Error::Quadrature(format!(
            "adaptive Simpson hit depth {SIMPSON_MAX_DEPTH} on [{a}, {b}] with error {err:.3e} > {tol:.3e}"
        )));
    }
    let half_tol = 0.5 * tol;
    let l = simpson_recurse(f, a, m, fa, flm, fm.clone(), left, half_tol, depth + 1)?;
    let r = simpson_recurse(f, m, b, fm, frm, fb, right, half_tol, depth + 1)?;
    Ok(l + r)
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
/// Returns `(argmax, max)` once the bracket is shorter than `tol`.
pub fn golden_max(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && points >= 2, "degenerate log grid");
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Inserts geometric midpoints between consecutive grid points; the result
/// contains the original grid, so extrema over it move monotonically.
pub fn refine_log_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len() - 1);
    for (i, &g) in grid.iter().enumerate() {
        out.push(g);
        if i + 1 < grid.len() {
            out.push((g * grid[i + 1]).sqrt());
        }
    }
    out
}
