//! Paraboloid sets, their time sections, and the two geometric comparison
//! checks between onion domains.
//!
//! The backward paraboloid with vertex `z0` collects the points whose
//! propagated offset fits inside the unit covariance ellipsoid:
//! `q(s) = <C(s)^-1 (x0 - E(s) x), x0 - E(s) x> < 1` with `s = t0 - t`.
//! Every spatial point is absorbed eventually (membership holds for all
//! sufficiently early times); the entry time is found by a log grid scan
//! plus bisection.  On top of this sit two sampled comparisons: an onion
//! with level `V_p(t0-t)` anchored at a paraboloid point must sit inside
//! the vertex onion with level blown up by the waiting-time coefficient,
//! and the corresponding kernel ratio must stay bounded below.

use nalgebra::DVector;
use rand::Rng;

use crate::constants::ConstantsReport;
use crate::covariance::CovarianceStore;
use crate::error::{Error, Result};
use crate::kernel::{ball_volume, Onion, Point};
use crate::linalg;
use crate::quadrature;
use crate::sample;

/// Margin below one required of the quadratic form during entry scans.
const ENTRY_MARGIN: f64 = 1e-9;
/// Bisection iterations when refining an entry crossing.
const ENTRY_BISECT_ITERS: usize = 60;

/// Paraboloid membership: `q(s) < 1` for `s = z0.t - t > 0`.
pub fn paraboloid_member(
    store: &CovarianceStore,
    z0: &Point,
    x: &DVector<f64>,
    t: f64,
) -> Result<bool> {
    let s = z0.t - t;
    if !(s > 0.0) {
        return Ok(false);
    }
    Ok(paraboloid_form(store, z0, x, s)? < 1.0)
}

/// The quadratic form `q(s)` through the propagated covariance.
fn paraboloid_form(store: &CovarianceStore, z0: &Point, x: &DVector<f64>, s: f64) -> Result<f64> {
    let bundle = store.bundle(s)?;
    let d = &z0.x - &bundle.propagator * x;
    Ok(bundle.c_inv_quadform(&d))
}

/// Time-section membership: the slice at depth `s` is the open ellipsoid
/// with center `E(-s) x0` and shape `M(s)` at unit radius.  Pointwise equal
/// to [`paraboloid_member`]; kept as an independent route (twisted
/// covariance instead of propagated) so the equality is testable.
pub fn sigma_section_member(
    store: &CovarianceStore,
    z0: &Point,
    s: f64,
    x: &DVector<f64>,
) -> Result<bool> {
    if !(s > 0.0) {
        return Ok(false);
    }
    let bundle = store.bundle(s)?;
    let y = x - &bundle.propagator_inv * &z0.x;
    Ok(bundle.m_inv_quadform(&y) < 1.0)
}

/// Outcome of an entry scan: the latest time from which membership holds
/// for every probed earlier time, or a flag that the horizon was exhausted.
#[derive(Debug, Clone)]
pub struct ParaboloidEntry {
    /// `t_entry = z0.t - s_entry`; `None` when even the deepest probe fails.
    pub t_entry: Option<f64>,
    pub s_entry: Option<f64>,
    /// Depth of the deepest probe.
    pub horizon: f64,
    /// Number of grid probes.
    pub probes: usize,
}

/// Scans depths on a log grid (default `[1e-6, 1e6]`, 400 points) for the
/// shortest depth `s*` such that `q(s) < 1 - 1e-9` for every probed
/// `s >= s*`, then refines the crossing by bisection.  Absorption says such
/// a depth always exists; if the whole grid fails, the report carries
/// `t_entry = None` and the caller decides whether that is fatal.
pub fn paraboloid_entry(
    store: &CovarianceStore,
    z0: &Point,
    x: &DVector<f64>,
    horizon: f64,
    points: usize,
) -> Result<ParaboloidEntry> {
    if !(horizon > 1.0) || points < 8 {
        return Err(Error::invalid(
            "entry scan needs horizon > 1 and at least 8 grid points".to_string(),
        ));
    }
    let grid = quadrature::log_spaced(1e-6, horizon, points);
    let values: Vec<f64> = grid
        .iter()
        .map(|&s| paraboloid_form(store, z0, x, s))
        .collect::<Result<_>>()?;
    let good = |q: f64| q < 1.0 - ENTRY_MARGIN;
    // Shortest suffix of the grid on which membership never fails.
    let mut first_good = values.len();
    for i in (0..values.len()).rev() {
        if good(values[i]) {
            first_good = i;
        } else {
            break;
        }
    }
    if first_good == values.len() {
        return Ok(ParaboloidEntry {
            t_entry: None,
            s_entry: None,
            horizon,
            probes: points,
        });
    }
    let s_entry = if first_good == 0 {
        grid[0]
    } else {
        // Bracket [bad, good]; bisect the threshold crossing.
        let (mut lo, mut hi) = (grid[first_good - 1], grid[first_good]);
        for _ in 0..ENTRY_BISECT_ITERS {
            let mid = 0.5 * (lo + hi);
            if good(paraboloid_form(store, z0, x, mid)?) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(ParaboloidEntry {
        t_entry: Some(z0.t - s_entry),
        s_entry: Some(s_entry),
        horizon,
        probes: points,
    })
}

/// How sample points are drawn from the inner onion.
#[derive(Debug, Clone, Copy)]
pub enum SampleMode {
    /// Depth uniform in `(0, s_max)`, position uniform in the slice.
    Uniform,
    /// Near-boundary stress test: positions squeezed against the slice edge
    /// so the inner kernel radius satisfies `R <= r_cap`.
    BoundaryShell { r_cap: f64 },
}

/// Checks the hypotheses shared by the containment and ratio checks:
/// `t <= t0 - 1` and `x` in the depth-`(t0 - t)` paraboloid section.
fn check_anchor_hypotheses(
    store: &CovarianceStore,
    z0: &Point,
    t: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    let s0 = z0.t - t;
    if !(s0 >= 1.0) {
        return Err(Error::hypothesis(format!(
            "anchor time too recent: need t <= t0 - 1, got gap {s0}"
        )));
    }
    if !sigma_section_member(store, z0, s0, x)? {
        return Err(Error::hypothesis(format!(
            "anchor point lies outside the depth-{s0} paraboloid section"
        )));
    }
    Ok(s0)
}

/// Draws a point from the inner onion: returns the point and the inner
/// kernel value at it.
fn draw_inner<R: Rng>(
    inner: &Onion,
    mode: SampleMode,
    rng: &mut R,
) -> Result<Option<(Point, f64)>> {
    let n = inner.store().dim();
    let s = inner.s_max() * rng.gen::<f64>();
    let section = match inner.section(s)? {
        Some(sec) => sec,
        None => return Ok(None),
    };
    let dir_scale = match mode {
        SampleMode::Uniform => sample::unit_ball(n, rng),
        SampleMode::BoundaryShell { r_cap } => {
            // R^2 = s (rho2 - q) <= r_cap^2 pins q against rho2.
            let gap_max = (r_cap * r_cap / s).min(section.rho2);
            let gap = gap_max * rng.gen::<f64>();
            let xi = ((section.rho2 - gap) / section.rho2).sqrt();
            sample::unit_vector(n, rng) * xi
        }
    };
    let y = &section.bundle.chol_m * (dir_scale * section.rho2.sqrt());
    let z = Point::new(&section.center + y, inner.pole().t - s);
    let w = inner.kernel(&z)?;
    Ok(Some((z, w)))
}

/// Result of the onion containment check.
#[derive(Debug, Clone)]
pub struct ContainmentReport {
    pub samples: usize,
    pub violations: usize,
    /// Minimum outer log-gauge over all samples; positive means strictly
    /// inside.
    pub worst_margin: f64,
    pub inner_depth: f64,
    pub outer_level: f64,
}

/// Containment comparison: an onion with level `V_p(t0 - t)` anchored at a
/// paraboloid point `(x, t)` must lie inside the vertex onion with level
/// `coefficient * V_p(t0 - t)`, where the coefficient `theta 2^(p/2)
/// sqrt(c_d)` comes from the constants chain.
pub fn onion_containment_check(
    store: &CovarianceStore,
    constants: &ConstantsReport,
    z0: &Point,
    t: f64,
    x: &DVector<f64>,
    sample_count: usize,
    seed: u64,
) -> Result<ContainmentReport> {
    let s0 = check_anchor_hypotheses(store, z0, t, x)?;
    let p = constants.p;
    let v_p = store.bundle(s0)?.log_volume_radius(p).exp();
    let inner = Onion::new(store.clone(), Point::new(x.clone(), t), p, v_p)?;
    let outer_level = constants.radius_coefficient * v_p;
    let outer = Onion::new(store.clone(), z0.clone(), p, outer_level)?;
    let mut rng = sample::stream_rng(seed, 0);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut samples = 0;
    while samples < sample_count {
        if let Some((z, _)) = draw_inner(&inner, SampleMode::Uniform, &mut rng)? {
            let margin = outer.log_gauge(&z)?;
            if !(margin > 0.0) || z.t >= outer.pole().t {
                violations += 1;
            }
            worst = worst.min(margin);
            samples += 1;
        }
    }
    Ok(ContainmentReport {
        samples,
        violations,
        worst_margin: worst,
        inner_depth: inner.s_max(),
        outer_level,
    })
}

/// Result of the kernel ratio check.
#[derive(Debug, Clone)]
pub struct RatioReport {
    pub samples: usize,
    pub min_ratio: f64,
    pub analytic_c: f64,
    pub meets_analytic: bool,
}

/// Kernel comparison: over points of the inner onion, the ratio of the
/// vertex kernel (level blown up by the doubled coefficient `theta_bar
/// 2^(p/2) sqrt(c_d)`) to the inner kernel must stay positive, and the
/// closed-form constant from [`analytic_ratio_constant`] should bound it
/// from below.
#[allow(clippy::too_many_arguments)]
pub fn kernel_ratio_check(
    store: &CovarianceStore,
    constants: &ConstantsReport,
    z0: &Point,
    t: f64,
    x: &DVector<f64>,
    sample_count: usize,
    seed: u64,
    mode: SampleMode,
) -> Result<RatioReport> {
    let s0 = check_anchor_hypotheses(store, z0, t, x)?;
    let p = constants.p;
    let v_p = store.bundle(s0)?.log_volume_radius(p).exp();
    let inner = Onion::new(store.clone(), Point::new(x.clone(), t), p, v_p)?;
    let outer_level =
        constants.theta_bar * 2f64.powf(p as f64 / 2.0) * constants.c_doubling.sqrt() * v_p;
    let outer = Onion::new(store.clone(), z0.clone(), p, outer_level)?;
    let analytic = analytic_ratio_constant(store, constants)?;
    let mut rng = sample::stream_rng(seed, 1);
    let mut min_ratio = f64::INFINITY;
    let mut samples = 0;
    while samples < sample_count {
        let (z, w_inner) = match draw_inner(&inner, mode, &mut rng)? {
            Some(pair) => pair,
            None => continue,
        };
        if w_inner <= 0.0 {
            // Measure-zero slice edge; the ratio compares interior points.
            continue;
        }
        let w_outer = outer.kernel(&z)?;
        min_ratio = min_ratio.min(w_outer / w_inner);
        samples += 1;
    }
    if !(min_ratio > 0.0) {
        return Err(Error::violation(format!(
            "kernel ratio dropped to {min_ratio:.3e} over {samples} samples"
        )));
    }
    Ok(RatioReport {
        samples,
        min_ratio,
        analytic_c: analytic.c,
        meets_analytic: min_ratio >= analytic.c,
    })
}

/// The closed-form pieces behind the ratio constant.
#[derive(Debug, Clone)]
pub struct RatioConstant {
    pub c_p: f64,
    pub c_p_prime: f64,
    pub m_p: f64,
    pub m_p_prime: f64,
    /// The assembled lower bound `c`.
    pub c: f64,
}

/// Assembles the analytic ratio constant
///
/// ```text
///     C_p  = omega_p 2^p (Lambda_A / c_plus + p/(p+2))
///     C'_p = omega_p 2^p max{ p/(p+2), Lambda_A K(1) }
///     M_p  = sup_{s in (0,1)} s^((p-2)/2) (log(c_d^(1/(2 Q_p))/s))^((p+2)/2)
///     M'_p = same with s-exponent (p - 2 - 4 n0)/2
///     c    = p omega_p 2^p / ((p+2)(M_p + M'_p) max{C_p, C'_p})
///            * (log 2 / Q_p)^((p+2)/2)
/// ```
///
/// `K(1)` is the empirical small-time conditioning bound, so the constant
/// inherits its grid accuracy.  Requires `p > 2 + 4 n0`; otherwise the
/// primed supremum diverges.
pub fn analytic_ratio_constant(
    store: &CovarianceStore,
    constants: &ConstantsReport,
) -> Result<RatioConstant> {
    let p = constants.p as f64;
    let n0 = constants.n0 as f64;
    if p <= 2.0 + 4.0 * n0 {
        return Err(Error::invalid(format!(
            "ratio constant needs p > 2 + 4 n0 (p = {p}, n0 = {n0})"
        )));
    }
    if constants.horizon != 1.0 {
        return Err(Error::invalid(
            "ratio constant uses the small-time bound at horizon 1; recompute constants with horizon = 1"
                .to_string(),
        ));
    }
    let omega_p = ball_volume(constants.p);
    let two_p = 2f64.powf(p);
    let lambda_a = linalg::sym_eigen_max(store.spec().a());
    let c_p = omega_p * two_p * (lambda_a / constants.c_plus + p / (p + 2.0));
    let c_p_prime = omega_p * two_p * (p / (p + 2.0)).max(lambda_a * constants.big_k);
    let g = constants.c_doubling.powf(1.0 / (2.0 * constants.q_p));
    let m_p = log_power_sup(0.5 * (p - 2.0), 0.5 * (p + 2.0), g);
    let m_p_prime = log_power_sup(0.5 * (p - 2.0 - 4.0 * n0), 0.5 * (p + 2.0), g);
    let c = p * omega_p * two_p / ((p + 2.0) * (m_p + m_p_prime) * c_p.max(c_p_prime))
        * (std::f64::consts::LN_2 / constants.q_p).powf(0.5 * (p + 2.0));
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::numeric(format!(
            "ratio constant degenerate: c = {c}"
        )));
    }
    Ok(RatioConstant {
        c_p,
        c_p_prime,
        m_p,
        m_p_prime,
        c,
    })
}

/// `sup_{s in (0,1)} s^a (log(g/s))^b` for `a > 0`, `b > 0`, `g >= 1`.
/// The log of the integrand is concave in `log s`, so golden-section search
/// is reliable; the interior critical point is `s* = g e^(-b/a)` when it
/// lies inside.
fn log_power_sup(a: f64, b: f64, g: f64) -> f64 {
    let mut f = |s: f64| a * s.ln() + b * (g / s).ln().max(1e-300).ln();
    let (_, max_log) = quadrature::golden_max(&mut f, 1e-14, 1.0 - 1e-14, 1e-12);
    max_log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{compute_constants, ConstantsConfig};
    use crate::models;
    use approx::assert_relative_eq;

    fn origin_pole(n: usize) -> Point {
        Point::new(DVector::zeros(n), 0.0)
    }

    fn quick_constants(
        spec: crate::operator::OperatorSpec,
        structure: crate::asymptotic::JordanStructure,
    ) -> (CovarianceStore, ConstantsReport) {
        let store = CovarianceStore::new(spec).unwrap();
        let config = ConstantsConfig {
            t_points: 50,
            small_t_points: 50,
            mu_points: 24,
            k0_t_points: 4,
            ..ConstantsConfig::default()
        };
        let report = compute_constants(&store, &structure, &config).unwrap();
        (store, report)
    }

    #[test]
    fn vertex_line_is_always_member() {
        let store = CovarianceStore::new(models::heat(1)).unwrap();
        let z0 = origin_pole(1);
        for &t in &[-0.1, -1.0, -100.0] {
            assert!(paraboloid_member(&store, &z0, &DVector::zeros(1), t).unwrap());
        }
        // Not defined forward in time.
        assert!(!paraboloid_member(&store, &z0, &DVector::zeros(1), 0.5).unwrap());
    }

    #[test]
    fn scalar_heat_entry_closed_form() {
        // q = x^2 / s, so membership starts at s = x^2.
        let store = CovarianceStore::new(models::heat(1)).unwrap();
        let entry = paraboloid_entry(
            &store,
            &origin_pole(1),
            &DVector::from_element(1, 2.0),
            1e6,
            400,
        )
        .unwrap();
        let t = entry.t_entry.expect("entry must exist");
        assert_relative_eq!(t, -4.0, epsilon = 1e-6);
    }

    #[test]
    fn rotation_entry_closed_form() {
        // Orthogonal propagator and C = sI give q = |x|^2 / s.
        let store = CovarianceStore::new(models::rotation()).unwrap();
        let x = DVector::from_column_slice(&[0.8, 0.6]);
        let entry = paraboloid_entry(&store, &origin_pole(2), &x, 1e6, 400).unwrap();
        assert_relative_eq!(entry.t_entry.unwrap(), -1.0, epsilon = 1e-6);
    }

    #[test]
    fn absorption_holds_for_all_builtins() {
        // Every spatial point is eventually absorbed; the scan must find an
        // entry well inside the horizon for moderate offsets.
        for (spec, _) in [
            (models::heat(2), ()),
            (models::rotation(), ()),
            (models::kolmogorov(), ()),
            (models::mix(), ()),
        ] {
            let n = spec.dim();
            let name = spec.name().to_string();
            let store = CovarianceStore::new(spec).unwrap();
            let mut rng = sample::stream_rng(31, 0);
            for _ in 0..10 {
                let x = sample::unit_ball(n, &mut rng) * 10.0;
                let entry = paraboloid_entry(&store, &origin_pole(n), &x, 1e6, 200).unwrap();
                assert!(
                    entry.t_entry.is_some(),
                    "no absorption for '{name}' at |x| = {}",
                    x.norm()
                );
            }
        }
    }

    #[test]
    fn sigma_sections_equal_paraboloid_slices() {
        let store = CovarianceStore::new(models::kolmogorov()).unwrap();
        let z0 = Point::new(DVector::from_column_slice(&[0.3, -0.2]), 1.0);
        let mut rng = sample::stream_rng(5, 0);
        for _ in 0..300 {
            let s = 0.1 + 5.0 * rng.gen::<f64>();
            let x = sample::gaussian_vector(2, &mut rng) * 2.0;
            let via_slice = sigma_section_member(&store, &z0, s, &x).unwrap();
            let via_form = paraboloid_member(&store, &z0, &x, z0.t - s).unwrap();
            assert_eq!(via_slice, via_form);
        }
    }

    #[test]
    fn onions_are_monotone_in_the_level() {
        let store = CovarianceStore::new(models::rotation()).unwrap();
        let small = Onion::new(store.clone(), origin_pole(2), 3, 0.7).unwrap();
        let large = Onion::new(store.clone(), origin_pole(2), 3, 2.9).unwrap();
        let mut rng = sample::stream_rng(6, 0);
        let mut inside = 0;
        for _ in 0..1000 {
            let z = Point::new(
                sample::gaussian_vector(2, &mut rng),
                -small.s_max() * rng.gen::<f64>() * 1.2,
            );
            if small.contains(&z).unwrap() {
                inside += 1;
                assert!(large.contains(&z).unwrap(), "monotone inclusion failed");
            }
        }
        assert!(inside > 10, "sampling never hit the small onion");
    }

    #[test]
    fn inner_onion_round_trips_its_depth() {
        // Level V_p(s0) must give back depth s0.
        let store = CovarianceStore::new(models::kolmogorov()).unwrap();
        let s0 = 2.5;
        let v = store.bundle(s0).unwrap().log_volume_radius(7).exp();
        let onion = Onion::new(store, origin_pole(2), 7, v).unwrap();
        assert_relative_eq!(onion.s_max(), s0, max_relative = 1e-10);
    }

    #[test]
    fn containment_preconditions_are_distinguished() {
        let (store, constants) = quick_constants(models::heat(1), models::heat_structure(1));
        let z0 = origin_pole(1);
        let x = DVector::zeros(1);
        let err = onion_containment_check(&store, &constants, &z0, -0.5, &x, 10, 1).unwrap_err();
        assert!(format!("{err}").contains("too recent"));
        let far = DVector::from_element(1, 50.0);
        let err = onion_containment_check(&store, &constants, &z0, -2.0, &far, 10, 1).unwrap_err();
        assert!(format!("{err}").contains("outside"));
    }

    #[test]
    fn scalar_heat_containment_has_no_violations() {
        let (store, constants) = quick_constants(models::heat(1), models::heat_structure(1));
        let z0 = origin_pole(1);
        let report =
            onion_containment_check(&store, &constants, &z0, -2.0, &DVector::zeros(1), 2000, 42)
                .unwrap();
        assert_eq!(report.violations, 0, "worst margin {}", report.worst_margin);
        assert!(report.worst_margin > 0.0);
    }

    #[test]
    fn containment_holds_at_the_unit_gap_edge() {
        let (store, constants) = quick_constants(models::rotation(), models::rotation_structure());
        let z0 = origin_pole(2);
        // x on the rim of the depth-1 section: q = |x|^2 at s0 = 1.
        let x = DVector::from_column_slice(&[0.9, 0.0]);
        let report = onion_containment_check(&store, &constants, &z0, -1.0, &x, 2000, 7).unwrap();
        assert_eq!(report.violations, 0, "worst margin {}", report.worst_margin);
    }

    #[test]
    fn inner_center_lies_in_outer_onion() {
        let (store, constants) = quick_constants(models::heat(1), models::heat_structure(1));
        let z0 = origin_pole(1);
        let t = -3.0;
        let x = DVector::from_element(1, 0.4);
        let s0 = z0.t - t;
        assert!(sigma_section_member(&store, &z0, s0, &x).unwrap());
        let v_p = store
            .bundle(s0)
            .unwrap()
            .log_volume_radius(constants.p)
            .exp();
        let outer = Onion::new(
            store.clone(),
            z0,
            constants.p,
            constants.radius_coefficient * v_p,
        )
        .unwrap();
        assert!(outer.contains(&Point::new(x, t)).unwrap());
    }

    #[test]
    fn rotation_ratio_constant_assembly() {
        let (store, constants) = quick_constants(models::rotation(), models::rotation_structure());
        let pieces = analytic_ratio_constant(&store, &constants).unwrap();
        // Exact sub-constants at c_d = 4, Q = 2.5, Lambda_A = c_plus = K(1) = 1.
        let omega3 = 4.0 * std::f64::consts::PI / 3.0;
        assert_relative_eq!(pieces.c_p, omega3 * 8.0 * 1.6, max_relative = 1e-9);
        assert_relative_eq!(pieces.c_p_prime, omega3 * 8.0, max_relative = 1e-9);
        assert_relative_eq!(pieces.m_p, pieces.m_p_prime, max_relative = 1e-12);
        // Dense-scan oracle for the primed/unprimed supremum.
        let g = 4f64.powf(1.0 / 5.0);
        let dense = (1..400_000)
            .map(|i| {
                let s = i as f64 / 400_000.0;
                s.sqrt() * (g / s).ln().powf(2.5)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(pieces.m_p, dense, max_relative = 1e-7);
        assert!(
            (1e-4..1e-2).contains(&pieces.c),
            "assembled constant {} out of expected band",
            pieces.c
        );
    }

    #[test]
    fn ratio_constant_rejects_shallow_p() {
        let (store, mut constants) =
            quick_constants(models::kolmogorov(), models::kolmogorov_structure());
        constants.p = 5; // needs p > 6 when n0 = 1
        assert!(analytic_ratio_constant(&store, &constants).is_err());
    }

    #[test]
    fn rotation_kernel_ratio_stays_above_analytic_constant() {
        let (store, constants) = quick_constants(models::rotation(), models::rotation_structure());
        let z0 = origin_pole(2);
        let x = DVector::from_column_slice(&[0.5, -0.3]);
        let report = kernel_ratio_check(
            &store,
            &constants,
            &z0,
            -1.5,
            &x,
            2000,
            11,
            SampleMode::Uniform,
        )
        .unwrap();
        assert!(report.min_ratio > 0.0);
        assert!(
            report.meets_analytic,
            "min ratio {} below analytic {}",
            report.min_ratio, report.analytic_c
        );
    }

    #[test]
    fn boundary_shell_ratio_stays_positive() {
        // Both kernels vanish at the inner boundary; the ratio must not.
        let (store, constants) = quick_constants(models::heat(1), models::heat_structure(1));
        let z0 = origin_pole(1);
        let report = kernel_ratio_check(
            &store,
            &constants,
            &z0,
            -2.0,
            &DVector::zeros(1),
            500,
            13,
            SampleMode::BoundaryShell { r_cap: 1e-3 },
        )
        .unwrap();
        assert!(report.min_ratio > 0.0);
        assert!(report.min_ratio.is_finite());
    }
}
