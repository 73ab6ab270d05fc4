//! Fundamental solution, onion-shaped level sets, and the mean value
//! formula.
//!
//! For a hypoelliptic pair the evolution operator has an explicit
//! fundamental solution built from the covariance family.  Its superlevel
//! sets, after a `p`-dimensional time weighting, are bounded "onion"
//! domains: each time slice is an ellipsoid shaped by the twisted covariance
//! `M(s)` whose radius grows from zero, peaks, and collapses again at a
//! maximal depth `s_max`.  Averaging a solution against the mean value
//! kernel over the onion reproduces its value at the pole; this module
//! computes the kernel and evaluates the average by deterministic tensor
//! quadrature (one or two space dimensions) or stratified Monte Carlo.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::covariance::{CovarianceBundle, CovarianceStore, LN_4PI};
use crate::error::{Error, Result};
use crate::operator::OperatorSpec;
use crate::quadrature;
use crate::sample;

/// Bisection iterations used to locate the onion depth `s_max`.
const S_MAX_BISECT_ITERS: usize = 50;

/// A space-time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: DVector<f64>,
    pub t: f64,
}

impl Point {
    pub fn new(x: DVector<f64>, t: f64) -> Self {
        Point { x, t }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Volume of the unit ball in `R^p` via the two-step recurrence
/// `omega_p = omega_{p-2} * 2 pi / p`.
pub fn ball_volume(p: u32) -> f64 {
    let mut even = 1.0; // omega_0
    let mut odd = 2.0; // omega_1
    for k in 1..=(p as u64 / 2) {
        even *= 2.0 * std::f64::consts::PI / (2 * k) as f64;
        if 2 * k < p as u64 {
            odd *= 2.0 * std::f64::consts::PI / (2 * k + 1) as f64;
        }
    }
    if p.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// `log Gamma(target; source)` for `target.t > source.t`:
///
/// ```text
///     Gamma = (4 pi)^(-N/2) det C(s)^(-1/2) exp(-q/4),
///     s = target.t - source.t,
///     q = <M(s)^-1 y, y>,  y = source.x - E(-s) target.x,
/// ```
///
/// which equals the usual propagated form `<C(s)^-1 d, d>` with
/// `d = target.x - E(s) source.x`; the twisted route needs one Cholesky
/// factorization that is also reused by the onion geometry.
pub fn log_fundamental(store: &CovarianceStore, target: &Point, source: &Point) -> Result<f64> {
    let s = target.t - source.t;
    if !(s > 0.0) {
        return Err(Error::invalid(format!(
            "fundamental solution needs target.t > source.t (gap {s})"
        )));
    }
    if target.dim() != store.dim() || source.dim() != store.dim() {
        return Err(Error::invalid("point dimension mismatch".to_string()));
    }
    let bundle = store.bundle(s)?;
    let y = &source.x - &bundle.propagator_inv * &target.x;
    let q = bundle.m_inv_quadform(&y);
    Ok(-0.5 * store.dim() as f64 * LN_4PI - 0.5 * bundle.log_det_c - 0.25 * q)
}

/// Causal fundamental solution: zero when the target does not lie strictly
/// later than the source.
pub fn fundamental(store: &CovarianceStore, target: &Point, source: &Point) -> Result<f64> {
    if target.t <= source.t {
        return Ok(0.0);
    }
    Ok(log_fundamental(store, target, source)?.exp())
}

/// One time slice of an onion: an open ellipsoid
/// `{x : <M(s)^-1 (x - center), x - center> < rho2}`.
#[derive(Debug, Clone)]
pub struct Section {
    /// Depth below the pole time.
    pub s: f64,
    /// Slice center `E(-s) x0`.
    pub center: DVector<f64>,
    /// Squared ellipsoid radius in the `M(s)^-1` metric.
    pub rho2: f64,
    pub bundle: Arc<CovarianceBundle>,
}

/// Superlevel set of the weighted fundamental solution with pole `z0`:
///
/// ```text
///     { z : t < t0,  (4 pi s)^(-p/2) Gamma(z0; z) > 1/r },  s = t0 - t.
/// ```
///
/// Slices exist for `s` strictly between `0` and `s_max`, the unique root of
/// the volume gauge `V_p(s) = r`.
#[derive(Debug, Clone)]
pub struct Onion {
    store: CovarianceStore,
    pole: Point,
    p: u32,
    r: f64,
    s_max: f64,
    omega_p: f64,
}

impl Onion {
    pub fn new(store: CovarianceStore, pole: Point, p: u32, r: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid(
                "onion parameter p must be positive".to_string(),
            ));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::invalid(format!(
                "onion level r = {r} must be positive"
            )));
        }
        if pole.dim() != store.dim() {
            return Err(Error::invalid("pole dimension mismatch".to_string()));
        }
        let s_max = solve_depth(&store, p, r)?;
        Ok(Onion {
            omega_p: ball_volume(p),
            store,
            pole,
            p,
            r,
            s_max,
        })
    }

    pub fn pole(&self) -> &Point {
        &self.pole
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn store(&self) -> &CovarianceStore {
        &self.store
    }

    /// The slice at depth `s`, or `None` outside `(0, s_max)` (where the
    /// squared radius would be nonpositive).
    pub fn section(&self, s: f64) -> Result<Option<Section>> {
        if !(s > 0.0 && s < self.s_max) {
            return Ok(None);
        }
        let bundle = self.store.bundle(s)?;
        let rho2 = 4.0 * (self.r.ln() - bundle.log_volume_radius(self.p));
        if rho2 <= 0.0 {
            return Ok(None);
        }
        let center = &bundle.propagator_inv * &self.pole.x;
        Ok(Some(Section {
            s,
            center,
            rho2,
            bundle,
        }))
    }

    /// Log of the level gauge `r (4 pi s)^(-p/2) Gamma(z0; z)`; the onion is
    /// its strict superlevel set at height one, and `log_gauge = (rho2-q)/4`.
    pub fn log_gauge(&self, z: &Point) -> Result<f64> {
        let s = self.pole.t - z.t;
        if !(s > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        let bundle = self.store.bundle(s)?;
        let rho2 = 4.0 * (self.r.ln() - bundle.log_volume_radius(self.p));
        let y = &z.x - &bundle.propagator_inv * &self.pole.x;
        let q = bundle.m_inv_quadform(&y);
        Ok(0.25 * (rho2 - q))
    }

    /// Strict interior membership.
    pub fn contains(&self, z: &Point) -> Result<bool> {
        let s = self.pole.t - z.t;
        if !(s > 0.0 && s < self.s_max) {
            return Ok(false);
        }
        Ok(self.log_gauge(z)? > 0.0)
    }

    /// Mean value kernel
    ///
    /// ```text
    ///     W = omega_p R^p (Wq + p / (4 (p + 2)) (R/s)^2),
    ///     R^2 = s (rho2 - q),   Wq = <A M^-1 y, M^-1 y> / 4,
    /// ```
    ///
    /// extended by zero outside the onion.
    pub fn kernel(&self, z: &Point) -> Result<f64> {
        let s = self.pole.t - z.t;
        if !(s > 0.0 && s < self.s_max) {
            return Ok(0.0);
        }
        let section = match self.section(s)? {
            Some(sec) => sec,
            None => return Ok(0.0),
        };
        let y = &z.x - &section.center;
        let q = section.bundle.m_inv_quadform(&y);
        if q >= section.rho2 {
            return Ok(0.0);
        }
        Ok(self.kernel_from_slice(&section, &y, q))
    }

    /// Kernel value with the slice geometry already in hand; `y` is the
    /// offset from the slice center and `q` its `M^-1` quadratic form.
    fn kernel_from_slice(&self, section: &Section, y: &DVector<f64>, q: f64) -> f64 {
        let r2 = section.s * (section.rho2 - q);
        if r2 <= 0.0 {
            return 0.0;
        }
        let v = section.bundle.m_inv_apply(y);
        let wq = 0.25 * (self.store.spec().a() * &v).dot(&v);
        let p = self.p as f64;
        let tail = p / (4.0 * (p + 2.0)) * r2 / (section.s * section.s);
        self.omega_p * r2.powf(0.5 * p) * (wq + tail)
    }
}

/// Root of `V_p(s) = r` by bracketed bisection in log space; `V_p` is
/// strictly increasing with limits `0` and `infinity`, so the root exists
/// and is unique.
fn solve_depth(store: &CovarianceStore, p: u32, r: f64) -> Result<f64> {
    let log_r = r.ln();
    let log_v = |s: f64| -> Result<f64> { Ok(store.bundle(s)?.log_volume_radius(p)) };
    let mut hi = 1.0;
    let mut hi_v = log_v(hi)?;
    let mut grow = 0;
    while hi_v <= log_r {
        hi *= 2.0;
        grow += 1;
        if grow > 420 {
            return Err(Error::numeric(format!(
                "onion level r = {r} larger than any representable volume gauge"
            )));
        }
        hi_v = log_v(hi)?;
    }
    let mut lo = hi;
    let mut shrink = 0;
    loop {
        lo *= 0.5;
        shrink += 1;
        if shrink > 2100 {
            return Err(Error::numeric(format!(
                "onion level r = {r} smaller than any representable volume gauge"
            )));
        }
        if log_v(lo)? < log_r {
            break;
        }
    }
    for _ in 0..S_MAX_BISECT_ITERS {
        let mid = 0.5 * (lo + hi);
        if log_v(mid)? < log_r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// How the mean value integral is evaluated.
#[derive(Debug, Clone)]
pub enum MvfMethod {
    /// Tensor quadrature: Gauss-Legendre in a squared-sine reparametrized
    /// depth, Gauss-Legendre in a sine-reparametrized ellipsoid radius, and
    /// a trapezoid rule in angle (two space dimensions only for the latter).
    Tensor {
        time_nodes: usize,
        radial_nodes: usize,
        angular_nodes: usize,
    },
    /// Stratified Monte Carlo: equal-width depth strata, uniform sampling
    /// of each slice ellipsoid.
    MonteCarlo {
        strata: usize,
        samples_per_stratum: usize,
        seed: u64,
    },
}

impl MvfMethod {
    pub fn default_tensor() -> Self {
        MvfMethod::Tensor {
            time_nodes: 160,
            radial_nodes: 64,
            angular_nodes: 64,
        }
    }

    pub fn default_monte_carlo(seed: u64) -> Self {
        MvfMethod::MonteCarlo {
            strata: 128,
            samples_per_stratum: 8192,
            seed,
        }
    }
}

/// Result of a mean value evaluation.
#[derive(Debug, Clone)]
pub struct MvfEstimate {
    pub value: f64,
    /// Standard error of the stratified estimator; absent for tensor
    /// quadrature.
    pub std_error: Option<f64>,
    pub evaluations: usize,
}

/// Evaluates `(1/r) * integral over the onion of u(z) W(z0; z) dz`, which
/// reproduces `u(z0)` when `u` solves the evolution equation.
pub fn mean_value(
    onion: &Onion,
    u: &dyn Fn(&Point) -> f64,
    method: &MvfMethod,
) -> Result<MvfEstimate> {
    match *method {
        MvfMethod::Tensor {
            time_nodes,
            radial_nodes,
            angular_nodes,
        } => mean_value_tensor(onion, u, time_nodes, radial_nodes, angular_nodes),
        MvfMethod::MonteCarlo {
            strata,
            samples_per_stratum,
            seed,
        } => mean_value_monte_carlo(onion, u, strata, samples_per_stratum, seed),
    }
}

fn mean_value_tensor(
    onion: &Onion,
    u: &dyn Fn(&Point) -> f64,
    time_nodes: usize,
    radial_nodes: usize,
    angular_nodes: usize,
) -> Result<MvfEstimate> {
    let n = onion.store.dim();
    if n > 2 {
        return Err(Error::invalid(format!(
            "tensor quadrature covers one or two space dimensions, not {n}; use Monte Carlo"
        )));
    }
    if time_nodes < 2 || radial_nodes < 2 || (n == 2 && angular_nodes < 4) {
        return Err(Error::invalid(
            "tensor quadrature needs more nodes".to_string(),
        ));
    }
    let (t_nodes, t_weights) = quadrature::gauss_legendre(time_nodes);
    let (r_nodes, r_weights) = quadrature::gauss_legendre(radial_nodes);
    let s_max = onion.s_max;
    let mut total = 0.0;
    let mut evaluations = 0;
    let half_pi = 0.5 * std::f64::consts::PI;
    for (tn, tw) in t_nodes.iter().zip(t_weights.iter()) {
        // s = s_max sin^2(phi) absorbs the inverse-square-root edge at
        // s -> 0 and the radius collapse at s -> s_max.
        let phi = half_pi * 0.5 * (tn + 1.0);
        let (sin_phi, cos_phi) = phi.sin_cos();
        let s = s_max * sin_phi * sin_phi;
        let ds = 2.0 * s_max * sin_phi * cos_phi * half_pi * 0.5 * tw;
        let section = match onion.section(s)? {
            Some(sec) => sec,
            None => continue,
        };
        let rho = section.rho2.sqrt();
        let t = onion.pole.t - s;
        let mut slice = 0.0;
        if n == 1 {
            // x = center + sqrt(M) rho sin(psi); the sine substitution makes
            // the (1 - xi^2)^(p/2) kernel factor smooth at the edges.
            let sqrt_m = section.bundle.chol_m[(0, 0)];
            for (rn, rw) in r_nodes.iter().zip(r_weights.iter()) {
                let psi = half_pi * rn;
                let (xi, cos_psi) = (psi.sin(), psi.cos());
                let y = DVector::from_element(1, sqrt_m * rho * xi);
                let q = section.rho2 * xi * xi;
                let w = onion.kernel_from_slice(&section, &y, q);
                if w == 0.0 {
                    continue;
                }
                let x = &section.center + &y;
                let dx = sqrt_m * rho * cos_psi * half_pi * rw;
                slice += w * u(&Point::new(x, t)) * dx;
                evaluations += 1;
            }
        } else {
            // Whitened polar coordinates: x = center + L (rho sin(psi) e(alpha)).
            let det_l = (0.5 * section.bundle.log_det_m).exp();
            let d_alpha = 2.0 * std::f64::consts::PI / angular_nodes as f64;
            for (rn, rw) in r_nodes.iter().zip(r_weights.iter()) {
                // psi in (0, pi/2]: map the [-1,1] node symmetrically.
                let psi = half_pi * 0.5 * (rn + 1.0);
                let (xi, cos_psi) = (psi.sin(), psi.cos());
                let q = section.rho2 * xi * xi;
                let radial_jac = xi * cos_psi * half_pi * 0.5 * rw;
                for ja in 0..angular_nodes {
                    let alpha = d_alpha * ja as f64;
                    let dir = DVector::from_column_slice(&[alpha.cos(), alpha.sin()]);
                    let y = &section.bundle.chol_m * (dir * (rho * xi));
                    let w = onion.kernel_from_slice(&section, &y, q);
                    if w == 0.0 {
                        continue;
                    }
                    let x = &section.center + &y;
                    let dx = det_l * section.rho2 * radial_jac * d_alpha;
                    slice += w * u(&Point::new(x, t)) * dx;
                    evaluations += 1;
                }
            }
        }
        total += slice * ds;
    }
    Ok(MvfEstimate {
        value: total / onion.r,
        std_error: None,
        evaluations,
    })
}

fn mean_value_monte_carlo(
    onion: &Onion,
    u: &dyn Fn(&Point) -> f64,
    strata: usize,
    samples_per_stratum: usize,
    seed: u64,
) -> Result<MvfEstimate> {
    if strata == 0 || samples_per_stratum < 2 {
        return Err(Error::invalid(
            "Monte Carlo needs at least one stratum and two samples per stratum".to_string(),
        ));
    }
    let n = onion.store.dim();
    let ball = ball_volume(n as u32);
    let h = onion.s_max / strata as f64;
    let m = samples_per_stratum as f64;
    let mut total = 0.0;
    let mut variance = 0.0;
    for k in 0..strata {
        let mut rng = sample::stream_rng(seed, k as u64);
        let s_lo = h * k as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples_per_stratum {
            let s = s_lo + h * rng.gen::<f64>();
            let g = match onion.section(s)? {
                Some(section) => {
                    let rho = section.rho2.sqrt();
                    let b = sample::unit_ball(n, &mut rng);
                    let q = section.rho2 * b.norm_squared();
                    let y = &section.bundle.chol_m * (b * rho);
                    let w = onion.kernel_from_slice(&section, &y, q);
                    if w == 0.0 {
                        0.0
                    } else {
                        // Slice volume in x: omega_N rho^N sqrt(det M).
                        let vol =
                            ball * (n as f64 * rho.ln() + 0.5 * section.bundle.log_det_m).exp();
                        let x = &section.center + &y;
                        let t = onion.pole.t - s;
                        vol * w * u(&Point::new(x, t))
                    }
                }
                None => 0.0,
            };
            sum += g;
            sum_sq += g * g;
        }
        let mean = sum / m;
        let var = (sum_sq / m - mean * mean).max(0.0) / (m - 1.0);
        total += h * mean;
        variance += h * h * var;
    }
    Ok(MvfEstimate {
        value: total / onion.r,
        std_error: Some(variance.sqrt() / onion.r),
        evaluations: strata * samples_per_stratum,
    })
}

/// Central finite-difference residual of the evolution operator
/// `K u = tr(A D^2 u) + <B x, D u> - d_t u` at `(x, t)` with step `h`.
/// Second-order accurate: for smooth `u` the residual of an exact solution
/// shrinks by 4 when `h` halves.
pub fn residual_evolution(
    spec: &OperatorSpec,
    u: &dyn Fn(&DVector<f64>, f64) -> f64,
    x: &DVector<f64>,
    t: f64,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid(format!("step h = {h} must be positive")));
    }
    if x.len() != spec.dim() {
        return Err(Error::invalid("point dimension mismatch".to_string()));
    }
    let n = spec.dim();
    let a = spec.a();
    let center = u(x, t);
    let shifted = |i: usize, di: f64, j: usize, dj: f64| {
        let mut xs = x.clone();
        xs[i] += di * h;
        xs[j] += dj * h;
        u(&xs, t)
    };
    let mut trace = 0.0;
    for i in 0..n {
        if a[(i, i)] != 0.0 {
            trace += a[(i, i)]
                * (shifted(i, 1.0, i, 0.0) - 2.0 * center + shifted(i, -1.0, i, 0.0))
                / (h * h);
        }
        for j in i + 1..n {
            if a[(i, j)] != 0.0 {
                let mixed =
                    (shifted(i, 1.0, j, 1.0) - shifted(i, 1.0, j, -1.0) - shifted(i, -1.0, j, 1.0)
                        + shifted(i, -1.0, j, -1.0))
                        / (4.0 * h * h);
                trace += 2.0 * a[(i, j)] * mixed;
            }
        }
    }
    let bx = spec.b() * x;
    let mut drift = 0.0;
    for i in 0..n {
        if bx[i] != 0.0 {
            drift += bx[i] * (shifted(i, 1.0, i, 0.0) - shifted(i, -1.0, i, 0.0)) / (2.0 * h);
        }
    }
    let dt = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
    Ok(trace + drift - dt)
}
