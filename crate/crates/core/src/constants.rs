//! Quantitative constants extracted from the covariance family.
//!
//! Everything downstream of the raw covariances is a handful of scalars:
//! linear growth floors for the two covariance branches, the volume doubling
//! constant, a scaling floor comparing `M(mu t)` with `M(t)`, small-time
//! conditioning, and the waiting-time factor `theta` assembled from the
//! doubling and scaling constants.  Each scalar is an extremum over an
//! explicit grid; the grid parameters travel with the report so a run can be
//! reproduced exactly.

use crate::asymptotic::JordanStructure;
use crate::covariance::CovarianceStore;
use crate::error::{Error, Result};
use crate::jsonout::Json;
use crate::linalg;
use crate::quadrature;

/// Configuration of the extraction grids.  Defaults cover six decades of
/// large time, six of small time, and twenty octaves of scale ratio.
#[derive(Debug, Clone)]
pub struct ConstantsConfig {
    /// Large-time window `[t_min, t_max]` for growth, doubling and scaling.
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// Small-time window `[small_t_min, horizon]` for conditioning.
    pub small_t_min: f64,
    /// Upper end of the small-time window.
    pub horizon: f64,
    pub small_t_points: usize,
    /// Scale-ratio grid `[mu_min, 1]` for the scaling floor.
    pub mu_min: f64,
    pub mu_points: usize,
    /// Times at which the scaling floor is probed.
    pub k0_t_points: usize,
    /// Kernel dimension parameter; defaults to `4 n0 + 3` for block depth
    /// `n0` when absent.
    pub p: Option<u32>,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig {
            t_min: 1.0,
            t_max: 1e6,
            t_points: 200,
            small_t_min: 1e-6,
            horizon: 1.0,
            small_t_points: 200,
            mu_min: (0.5f64).powi(20),
            mu_points: 64,
            k0_t_points: 16,
            p: None,
        }
    }
}

impl ConstantsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(Error::invalid("need 0 < t_min < t_max".to_string()));
        }
        if !(self.small_t_min > 0.0 && self.horizon > self.small_t_min) {
            return Err(Error::invalid("need 0 < small_t_min < horizon".to_string()));
        }
        if !(self.mu_min > 0.0 && self.mu_min < 1.0) {
            return Err(Error::invalid("need 0 < mu_min < 1".to_string()));
        }
        if self.t_points < 2
            || self.small_t_points < 2
            || self.mu_points < 2
            || self.k0_t_points < 1
        {
            return Err(Error::invalid("grids need at least two points".to_string()));
        }
        if self.p == Some(0) {
            return Err(Error::invalid(
                "kernel dimension p must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Linear growth floors of the two covariance branches over a grid:
/// `c_minus = min lambda_min(C(t))/t` and `c_plus = min lambda_min(M(t))/t`.
#[derive(Debug, Clone)]
pub struct GrowthConstants {
    pub c_minus: f64,
    pub c_minus_at: f64,
    pub c_plus: f64,
    pub c_plus_at: f64,
}

pub fn growth_constants(store: &CovarianceStore, grid: &[f64]) -> Result<GrowthConstants> {
    let (c_minus_at, c_minus) =
        grid_min(grid, |t| Ok(linalg::sym_eigen_min(&store.bundle(t)?.c) / t))?;
    let (c_plus_at, c_plus) =
        grid_min(grid, |t| Ok(linalg::sym_eigen_min(&store.bundle(t)?.m) / t))?;
    if c_minus <= 0.0 || c_plus <= 0.0 {
        return Err(Error::numeric(format!(
            "growth floor degenerate: c_minus={c_minus:.3e}, c_plus={c_plus:.3e}"
        )));
    }
    Ok(GrowthConstants {
        c_minus,
        c_minus_at,
        c_plus,
        c_plus_at,
    })
}

/// Volume doubling constant `c_d = max D(2t)/D(t)` over a grid, computed in
/// log space from the Cholesky diagonals.
#[derive(Debug, Clone)]
pub struct DoublingConstant {
    pub c_d: f64,
    pub at: f64,
}

pub fn doubling_constant(store: &CovarianceStore, grid: &[f64]) -> Result<DoublingConstant> {
    let (at, log_ratio) = grid_max(grid, |t| {
        Ok(store.bundle(2.0 * t)?.log_det_c - store.bundle(t)?.log_det_c)
    })?;
    let c_d = log_ratio.exp();
    if !(c_d >= 1.0 - 1e-12) {
        return Err(Error::numeric(format!(
            "doubling ratio {c_d} below one: determinant not increasing"
        )));
    }
    Ok(DoublingConstant { c_d, at })
}

/// Scaling floor `k0 = min mu / lambda_max(M(t)^-1 M(mu t))` over a grid of
/// scales `mu` and probe times `t`.  The eigenvalue is evaluated through the
/// Cholesky factors (`X = L_t^-1 L_{mu t}`, then `lambda_max(X^T X)`), which
/// stays accurate when the two covariances differ by many orders of
/// magnitude.
#[derive(Debug, Clone)]
pub struct ScalingFloor {
    pub k0: f64,
    pub at_mu: f64,
    pub at_t: f64,
}

pub fn scaling_floor(
    store: &CovarianceStore,
    t_grid: &[f64],
    mu_grid: &[f64],
) -> Result<ScalingFloor> {
    if mu_grid.iter().any(|&mu| !(mu > 0.0 && mu <= 1.0)) {
        return Err(Error::invalid(
            "scaling grid must lie in (0, 1]".to_string(),
        ));
    }
    let mut best = f64::INFINITY;
    let (mut at_mu, mut at_t) = (f64::NAN, f64::NAN);
    for &t in t_grid {
        let outer = store.bundle(t)?;
        for &mu in mu_grid {
            let inner = store.bundle(mu * t)?;
            let x = linalg::solve_lower_matrix(&outer.chol_m, &inner.chol_m)?;
            let lam = linalg::sym_eigen_max(&(x.transpose() * &x));
            if lam <= 0.0 {
                return Err(Error::numeric(format!(
                    "scaling ratio degenerate at t={t}, mu={mu}"
                )));
            }
            let value = mu / lam;
            if value < best {
                best = value;
                at_mu = mu;
                at_t = t;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::invalid("empty scaling grid".to_string()));
    }
    Ok(ScalingFloor {
        k0: best,
        at_mu,
        at_t,
    })
}

/// Small-time conditioning: the maximum over `t` in the window of
/// `t^(2 n0 + 1) / lambda_min(M(t))` and `lambda_max(M(t)) / t`, plus a
/// log-log slope fit of `lambda_min(M(t))` over the smallest decade of the
/// window.  The slope identifies the deepest block: it must approach
/// `2 n0 + 1`.
#[derive(Debug, Clone)]
pub struct SmallTimeProfile {
    pub big_k: f64,
    pub big_k_at: f64,
    pub lambda_min_slope: f64,
    pub expected_slope: f64,
}

pub fn small_time_profile(
    store: &CovarianceStore,
    n0: usize,
    grid: &[f64],
) -> Result<SmallTimeProfile> {
    let power = 2 * n0 as i32 + 1;
    let (big_k_at, big_k) = grid_max(grid, |t| {
        let bundle = store.bundle(t)?;
        let (lo, hi) = linalg::sym_eigen_range(&bundle.m);
        if lo <= 0.0 {
            return Err(Error::numeric(format!(
                "lambda_min(M({t})) = {lo:.3e} not positive"
            )));
        }
        Ok((t.powi(power) / lo).max(hi / t))
    })?;
    let t_lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let fit: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&t| t <= 10.0 * t_lo)
        .map(|&t| {
            let lo = linalg::sym_eigen_min(&store.bundle(t)?.m);
            Ok((t.ln(), lo.ln()))
        })
        .collect::<Result<_>>()?;
    if fit.len() < 3 {
        return Err(Error::invalid(
            "small-time grid too sparse for a slope fit (need 3 points in the lowest decade)"
                .to_string(),
        ));
    }
    Ok(SmallTimeProfile {
        big_k,
        big_k_at,
        lambda_min_slope: least_squares_slope(&fit),
        expected_slope: power as f64,
    })
}

/// Waiting-time chain: from the doubling constant, the scaling floor and the
/// kernel dimension `p` it produces the doubling exponent
/// `Q_p = (p + log2 c_d)/2`, the expansion factor `theta` via
///
/// ```text
///     log theta = 1/2 + (2 Q_p / k0) * max_{s in (0, 1/2]}
///                   s * log(c_d^(1/(2 Q_p)) (1/s - 1)),
/// ```
///
/// the doubled factor `theta_bar = 2 theta`, and the radius coefficient
/// `theta * 2^(p/2) * sqrt(c_d)`.  The maximized function is strictly
/// concave in `s`, so a golden-section search is exact up to roundoff.
#[derive(Debug, Clone)]
pub struct ThetaChain {
    pub q_p: f64,
    pub log_theta: f64,
    pub theta: f64,
    pub theta_bar: f64,
    pub radius_coefficient: f64,
    pub s_at: f64,
}

pub fn theta_chain(p: u32, c_d: f64, k0: f64) -> Result<ThetaChain> {
    if p == 0 {
        return Err(Error::invalid(
            "kernel dimension p must be positive".to_string(),
        ));
    }
    if !(c_d >= 1.0) {
        return Err(Error::invalid(format!(
            "doubling constant {c_d} must be >= 1"
        )));
    }
    if !(k0 > 0.0 && k0 <= 1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "scaling floor {k0} must lie in (0, 1]"
        )));
    }
    let q_p = 0.5 * (p as f64 + c_d.log2());
    let g = c_d.powf(1.0 / (2.0 * q_p));
    let mut f = |s: f64| s * (g * (1.0 / s - 1.0)).ln();
    let (s_at, max_f) = quadrature::golden_max(&mut f, 1e-12, 0.5, 1e-10);
    let log_theta = 0.5 + (2.0 * q_p / k0) * max_f.max(0.0);
    let theta = log_theta.exp();
    Ok(ThetaChain {
        q_p,
        log_theta,
        theta,
        theta_bar: 2.0 * theta,
        radius_coefficient: theta * (2.0f64).powf(p as f64 / 2.0) * c_d.sqrt(),
        s_at,
    })
}

/// Everything in one flat record, with the grid parameters that produced it.
#[derive(Debug, Clone)]
pub struct ConstantsReport {
    pub model: String,
    pub dim: usize,
    pub n0: usize,
    pub p: u32,
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub small_t_min: f64,
    pub horizon: f64,
    pub small_t_points: usize,
    pub mu_min: f64,
    pub mu_points: usize,
    pub k0_t_points: usize,
    pub c_minus: f64,
    pub c_minus_at: f64,
    pub c_plus: f64,
    pub c_plus_at: f64,
    pub c_doubling: f64,
    pub c_doubling_at: f64,
    /// Worst relative movement of the three large-time extrema under one
    /// nested grid refinement; the reported values come from the refined
    /// grid.
    pub refinement_shift: f64,
    pub k0: f64,
    pub k0_at_mu: f64,
    pub k0_at_t: f64,
    pub big_k: f64,
    pub big_k_at: f64,
    pub lambda_min_slope: f64,
    pub expected_slope: f64,
    pub q_p: f64,
    pub log_theta: f64,
    pub theta: f64,
    pub theta_bar: f64,
    pub radius_coefficient: f64,
    pub theta_s_at: f64,
}

/// Block depth parameter `n0`: deepest zero-based coordinate depth across
/// all blocks.
pub fn block_depth(structure: &JordanStructure) -> usize {
    let nil = structure
        .nilpotent_sizes
        .iter()
        .map(|&s| s - 1)
        .max()
        .unwrap_or(0);
    let rot = structure
        .rotation_blocks
        .iter()
        .map(|r| r.half_size - 1)
        .max()
        .unwrap_or(0);
    nil.max(rot)
}

pub fn compute_constants(
    store: &CovarianceStore,
    structure: &JordanStructure,
    config: &ConstantsConfig,
) -> Result<ConstantsReport> {
    config.validate()?;
    structure.validate(store.spec())?;
    let n0 = block_depth(structure);
    let p = config.p.unwrap_or(4 * n0 as u32 + 3);

    let base_grid = quadrature::log_spaced(config.t_min, config.t_max, config.t_points);
    let fine_grid = quadrature::refine_log_grid(&base_grid);
    let growth_base = growth_constants(store, &base_grid)?;
    let growth = growth_constants(store, &fine_grid)?;
    let doubling_base = doubling_constant(store, &base_grid)?;
    let doubling = doubling_constant(store, &fine_grid)?;
    let refinement_shift = [
        relative_shift(growth_base.c_minus, growth.c_minus),
        relative_shift(growth_base.c_plus, growth.c_plus),
        relative_shift(doubling_base.c_d, doubling.c_d),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let k0_t_grid = if config.k0_t_points == 1 {
        vec![config.t_min]
    } else {
        quadrature::log_spaced(config.t_min, config.t_max, config.k0_t_points)
    };
    let mu_grid = quadrature::log_spaced(config.mu_min, 1.0, config.mu_points);
    let scaling = scaling_floor(store, &k0_t_grid, &mu_grid)?;

    let small_grid =
        quadrature::log_spaced(config.small_t_min, config.horizon, config.small_t_points);
    let small = small_time_profile(store, n0, &small_grid)?;

    let theta = theta_chain(p, doubling.c_d, scaling.k0)?;

    Ok(ConstantsReport {
        model: store.spec().name().to_string(),
        dim: store.dim(),
        n0,
        p,
        t_min: config.t_min,
        t_max: config.t_max,
        t_points: config.t_points,
        small_t_min: config.small_t_min,
        horizon: config.horizon,
        small_t_points: config.small_t_points,
        mu_min: config.mu_min,
        mu_points: config.mu_points,
        k0_t_points: config.k0_t_points,
        c_minus: growth.c_minus,
        c_minus_at: growth.c_minus_at,
        c_plus: growth.c_plus,
        c_plus_at: growth.c_plus_at,
        c_doubling: doubling.c_d,
        c_doubling_at: doubling.at,
        refinement_shift,
        k0: scaling.k0,
        k0_at_mu: scaling.at_mu,
        k0_at_t: scaling.at_t,
        big_k: small.big_k,
        big_k_at: small.big_k_at,
        lambda_min_slope: small.lambda_min_slope,
        expected_slope: small.expected_slope,
        q_p: theta.q_p,
        log_theta: theta.log_theta,
        theta: theta.theta,
        theta_bar: theta.theta_bar,
        radius_coefficient: theta.radius_coefficient,
        theta_s_at: theta.s_at,
    })
}

impl ConstantsReport {
    pub fn to_json(&self) -> Json {
        let mut obj = Json::object();
        obj.push("model", Json::Str(self.model.clone()));
        obj.push("dim", Json::Int(self.dim as i64));
        obj.push("n0", Json::Int(self.n0 as i64));
        obj.push("p", Json::Int(self.p as i64));
        obj.push("t_min", Json::Float(self.t_min));
        obj.push("t_max", Json::Float(self.t_max));
        obj.push("t_points", Json::Int(self.t_points as i64));
        obj.push("small_t_min", Json::Float(self.small_t_min));
        obj.push("horizon", Json::Float(self.horizon));
        obj.push("small_t_points", Json::Int(self.small_t_points as i64));
        obj.push("mu_min", Json::Float(self.mu_min));
        obj.push("mu_points", Json::Int(self.mu_points as i64));
        obj.push("k0_t_points", Json::Int(self.k0_t_points as i64));
        obj.push("c_minus", Json::Float(self.c_minus));
        obj.push("c_minus_at", Json::Float(self.c_minus_at));
        obj.push("c_plus", Json::Float(self.c_plus));
        obj.push("c_plus_at", Json::Float(self.c_plus_at));
        obj.push("c_doubling", Json::Float(self.c_doubling));
        obj.push("c_doubling_at", Json::Float(self.c_doubling_at));
        obj.push("refinement_shift", Json::Float(self.refinement_shift));
        obj.push("k0", Json::Float(self.k0));
        obj.push("k0_at_mu", Json::Float(self.k0_at_mu));
        obj.push("k0_at_t", Json::Float(self.k0_at_t));
        obj.push("big_k", Json::Float(self.big_k));
        obj.push("big_k_at", Json::Float(self.big_k_at));
        obj.push("lambda_min_slope", Json::Float(self.lambda_min_slope));
        obj.push("expected_slope", Json::Float(self.expected_slope));
        obj.push("q_p", Json::Float(self.q_p));
        obj.push("log_theta", Json::Float(self.log_theta));
        obj.push("theta", Json::Float(self.theta));
        obj.push("theta_bar", Json::Float(self.theta_bar));
        obj.push("radius_coefficient", Json::Float(self.radius_coefficient));
        obj.push("theta_s_at", Json::Float(self.theta_s_at));
        obj
    }
}

fn relative_shift(base: f64, fine: f64) -> f64 {
    (fine - base).abs() / fine.abs().max(1e-300)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn grid_min(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let mut best = f64::INFINITY;
    let mut at = f64::NAN;
    for &t in grid {
        let v = f(t)?;
        if !v.is_finite() {
            return Err(Error::numeric(format!("grid scan produced {v} at t={t}")));
        }
        if v < best {
            best = v;
            at = t;
        }
    }
    if !best.is_finite() {
        return Err(Error::invalid("empty grid".to_string()));
    }
    Ok((at, best))
}

fn grid_max(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let (at, neg) = grid_min(grid, |t| f(t).map(|v| -v))?;
    Ok((at, -neg))
}
