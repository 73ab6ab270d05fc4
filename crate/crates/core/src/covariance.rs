//! The covariance family of an operator pair and its derived quantities.
//!
//! For `E(s) = exp(-s B)` the family
//!
//! ```text
//!     C(s) = int_0^s E(sigma) A E(sigma)^T d sigma
//! ```
//!
//! is positive definite for every `s > 0` exactly when the pair is
//! hypoelliptic.  The drift-twisted companion `M(s) = E(-s) C(s) E(-s)^T`
//! carries the same determinant whenever `tr B = 0` and drives the
//! small-time and large-time scaling analysis.  The primary computation
//! routes through a single block exponential
//!
//! ```text
//!     exp(s [[B, A], [0, -B^T]]) = [[exp(sB), exp(sB) C(s)], [0, exp(-sB^T)]],
//! ```
//!
//! so one Pade evaluation yields propagators and covariance together; an
//! adaptive-Simpson quadrature oracle provides an independent reference.
//! Determinants are kept in log space throughout.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::OperatorSpec;
use crate::quadrature;

/// Tolerance for the symmetry defect of a computed covariance, relative to
/// the natural scale of the products that produced it.  The defect of
/// `F C F^T` is roundoff amplified by `|F|^2 |C|`, so gating against the
/// result's own magnitude would misfire whenever the conjugation cancels.
const SYMMETRY_DEFECT_TOL: f64 = 1e-12;
/// Smallest admissible entrywise tolerance for the quadrature oracle.
const ORACLE_MIN_TOL: f64 = 1e-13;
/// Capacity of the per-operator bundle cache.
const CACHE_CAPACITY: usize = 4096;

pub const LN_4PI: f64 = 2.531_024_246_969_291;

/// Everything the downstream modules need about the covariance at one `s`:
/// propagators, both covariance forms, their Cholesky factors, and log
/// determinants.
#[derive(Debug, Clone)]
pub struct CovarianceBundle {
    pub s: f64,
    /// `E(s) = exp(-s B)`.
    pub propagator: DMatrix<f64>,
    /// `E(-s) = exp(s B)`.
    pub propagator_inv: DMatrix<f64>,
    /// `C(s)`.
    pub c: DMatrix<f64>,
    /// `M(s) = E(-s) C(s) E(-s)^T`.
    pub m: DMatrix<f64>,
    /// Lower Cholesky factor of `C(s)`.
    pub chol_c: DMatrix<f64>,
    /// Lower Cholesky factor of `M(s)`.
    pub chol_m: DMatrix<f64>,
    pub log_det_c: f64,
    pub log_det_m: f64,
}

impl CovarianceBundle {
    /// `<C(s)^{-1} v, v>` through a triangular solve.
    pub fn c_inv_quadform(&self, v: &DVector<f64>) -> f64 {
        linalg::solve_lower(&self.chol_c, v).norm_squared()
    }

    /// `<M(s)^{-1} v, v>` through a triangular solve.
    pub fn m_inv_quadform(&self, v: &DVector<f64>) -> f64 {
        linalg::solve_lower(&self.chol_m, v).norm_squared()
    }

    /// `M(s)^{-1} v` by forward and backward substitution.
    pub fn m_inv_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let w = linalg::solve_lower(&self.chol_m, v);
        self.chol_m
            .transpose()
            .solve_upper_triangular(&w)
            .expect("upper-triangular solve hit a zero pivot")
    }

    /// `det C(s)`, leaving log space only at the boundary.
    pub fn det(&self) -> f64 {
        self.log_det_c.exp()
    }

    /// Log of the level-set volume radius function
    /// `V_p(s) = sqrt((4 pi)^{N+p} s^p det C(s))`.
    pub fn log_volume_radius(&self, p: u32) -> f64 {
        let n = self.c.nrows() as f64;
        0.5 * ((n + p as f64) * LN_4PI + p as f64 * self.s.ln() + self.log_det_c)
    }
}

/// `(det C(s), V_p(s))` for a bundle.
pub fn det_and_volume(bundle: &CovarianceBundle, p: u32) -> (f64, f64) {
    (bundle.det(), bundle.log_volume_radius(p).exp())
}

/// Computes a covariance bundle directly, bypassing any cache.
pub fn covariance_bundle(spec: &OperatorSpec, s: f64) -> Result<CovarianceBundle> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::invalid(format!(
            "covariance requires a finite s > 0, got {s}"
        )));
    }
    if !spec.is_hypoelliptic() {
        return Err(Error::hypothesis(format!(
            "operator '{}' fails the Kalman rank condition; covariance is singular",
            spec.name()
        )));
    }
    let n = spec.dim();
    // Block generator [[B, A], [0, -B^T]].
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(spec.b());
    h.view_mut((0, n), (n, n)).copy_from(spec.a());
    h.view_mut((n, n), (n, n))
        .copy_from(&(-spec.b().transpose()));
    let big = linalg::mat_exp(&h, s)?;
    let propagator_inv = big.view((0, 0), (n, n)).into_owned(); // exp(sB)
    let g = big.view((0, n), (n, n)).into_owned(); // exp(sB) C(s)
    let propagator = big.view((n, n), (n, n)).transpose().into_owned(); // exp(-sB)
    let c_raw = &propagator * &g;
    let c_scale = propagator.amax() * g.amax();
    let c = symmetrize_checked(c_raw, c_scale, s, spec.name(), "C")?;
    let m_raw = &propagator_inv * &c * propagator_inv.transpose();
    let m_scale = propagator_inv.amax().powi(2) * c.amax();
    let m = symmetrize_checked(m_raw, m_scale, s, spec.name(), "M")?;
    let chol_c = cholesky_factor(&c, s, spec.name(), "C")?;
    let chol_m = cholesky_factor(&m, s, spec.name(), "M")?;
    let log_det_c = 2.0 * chol_c.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_det_m = 2.0 * chol_m.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(CovarianceBundle {
        s,
        propagator,
        propagator_inv,
        c,
        m,
        chol_c,
        chol_m,
        log_det_c,
        log_det_m,
    })
}

fn symmetrize_checked(
    mat: DMatrix<f64>,
    scale_hint: f64,
    s: f64,
    name: &str,
    label: &str,
) -> Result<DMatrix<f64>> {
    let defect = linalg::max_abs_diff(&mat, &mat.transpose());
    let scale = mat.amax().max(scale_hint).max(1.0);
    if defect > SYMMETRY_DEFECT_TOL * scale {
        return Err(Error::numeric(format!(
            "{label}({s}) of '{name}' has symmetry defect {defect:.3e} (scale {scale:.3e})"
        )));
    }
    Ok((&mat + mat.transpose()) * 0.5)
}

fn cholesky_factor(mat: &DMatrix<f64>, s: f64, name: &str, label: &str) -> Result<DMatrix<f64>> {
    nalgebra::linalg::Cholesky::new(mat.clone())
        .map(|ch| ch.l())
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: format!("{label}({s}) of '{name}'"),
        })
}

/// Reference value of `C(s)` by adaptive Simpson quadrature of the defining
/// integral, with entrywise error target `tol` (at least `1e-13`).  Each
/// integrand evaluation uses an independent Pade propagator, so agreement
/// with [`covariance_bundle`] cross-checks the block-exponential route.
pub fn covariance_quadrature_oracle(spec: &OperatorSpec, s: f64, tol: f64) -> Result<DMatrix<f64>> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("oracle requires s > 0, got {s}")));
    }
    if !(tol >= ORACLE_MIN_TOL) {
        return Err(Error::invalid(format!(
            "oracle tolerance {tol:.3e} below floor {ORACLE_MIN_TOL:.0e}"
        )));
    }
    let a = spec.a().clone();
    let b = spec.b().clone();
    let mut integrand = |sigma: f64| {
        let e = linalg::mat_exp(&b, -sigma).expect("propagator of validated drift");
        &e * &a * e.transpose()
    };
    quadrature::adaptive_simpson_matrix(&mut integrand, 0.0, s, tol)
}

/// A shared, cached view of one operator's covariance family.
///
/// Bundles are memoized per `s` (keyed by bit pattern) in a bounded
/// least-recently-used cache; results are pure functions of `(spec, s)`, so
/// cache state never changes a value.  Cloning the store shares the cache.
#[derive(Clone)]
pub struct CovarianceStore {
    inner: Arc<StoreInner>,
}

impl std::fmt::Debug for CovarianceStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CovarianceStore")
            .field("spec", &self.inner.spec.name())
            .finish_non_exhaustive()
    }
}

struct StoreInner {
    spec: OperatorSpec,
    cache: Mutex<Lru>,
}

struct Lru {
    capacity: usize,
    tick: u64,
    // key -> (bundle, last-use tick); ticks index the eviction order map.
    map: HashMap<u64, (Arc<CovarianceBundle>, u64)>,
    order: BTreeMap<u64, u64>,
}

impl Lru {
    fn new(capacity: usize) -> Self {
        Lru {
            capacity,
            tick: 0,
            map: HashMap::new(),
            order: BTreeMap::new(),
        }
    }

    fn get(&mut self, key: u64) -> Option<Arc<CovarianceBundle>> {
        let tick = self.next_tick();
        if let Some((bundle, last)) = self.map.get_mut(&key) {
            self.order.remove(last);
            self.order.insert(tick, key);
            *last = tick;
            return Some(bundle.clone());
        }
        None
    }

    fn insert(&mut self, key: u64, bundle: Arc<CovarianceBundle>) {
        let tick = self.next_tick();
        if let Some((_, last)) = self.map.get(&key) {
            let last = *last;
            self.order.remove(&last);
        } else if self.map.len() >= self.capacity {
            if let Some((&oldest, &victim)) = self.order.iter().next() {
                self.order.remove(&oldest);
                self.map.remove(&victim);
            }
        }
        self.order.insert(tick, key);
        self.map.insert(key, (bundle, tick));
    }

    fn next_tick(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }
}

impl CovarianceStore {
    /// Builds a store; the operator must be hypoelliptic.
    pub fn new(spec: OperatorSpec) -> Result<Self> {
        Self::with_capacity(spec, CACHE_CAPACITY)
    }

    pub fn with_capacity(spec: OperatorSpec, capacity: usize) -> Result<Self> {
        if !spec.is_hypoelliptic() {
            return Err(Error::hypothesis(format!(
                "operator '{}' fails the Kalman rank condition",
                spec.name()
            )));
        }
        Ok(CovarianceStore {
            inner: Arc::new(StoreInner {
                spec,
                cache: Mutex::new(Lru::new(capacity.max(1))),
            }),
        })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.inner.spec
    }

    pub fn dim(&self) -> usize {
        self.inner.spec.dim()
    }

    /// Covariance bundle at `s`, from cache when available.
    pub fn bundle(&self, s: f64) -> Result<Arc<CovarianceBundle>> {
        let key = s.to_bits();
        if let Some(hit) = self.inner.cache.lock().unwrap().get(key) {
            return Ok(hit);
        }
        let bundle = Arc::new(covariance_bundle(&self.inner.spec, s)?);
        self.inner.cache.lock().unwrap().insert(key, bundle.clone());
        Ok(bundle)
    }

    /// `V_p(s)` without exposing the bundle.
    pub fn volume_radius(&self, p: u32, s: f64) -> Result<f64> {
        Ok(self.bundle(s)?.log_volume_radius(p).exp())
    }
}
