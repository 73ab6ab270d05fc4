//! Canonical drift block structure and verification of the large-time
//! self-similar asymptotics of the twisted covariance family.
//!
//! A purely imaginary drift spectrum means `B^T` is orthogonally conjugate
//! to a block diagonal of nilpotent Jordan blocks and rotation blocks.  The
//! declared [`JordanStructure`] asserts that the operator is already written
//! in that frame; everything here is exact linear algebra on the blocks:
//! anisotropic dilations, the limit projector onto leading block
//! coordinates, frequency-group projectors, and the averaged quadratic forms
//! whose `1/t` decay expresses the asymptotic self-similarity.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::covariance::CovarianceStore;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::OperatorSpec;
use crate::quadrature;
use crate::sample;

/// Entrywise tolerance when matching a declared structure against a drift.
const STRUCTURE_MATCH_TOL: f64 = 1e-12;
/// Relative agreement required between a sigma integral and its
/// doubled-panel recomputation.
const PANEL_DOUBLING_TOL: f64 = 1e-8;

/// One rotation block: acts on `2 * half_size` coordinates with frequency
/// `frequency`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationBlock {
    pub half_size: usize,
    pub frequency: f64,
}

/// Declared canonical block structure of a drift transpose: nilpotent Jordan
/// blocks first, then rotation blocks with ascending positive frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanStructure {
    pub nilpotent_sizes: Vec<usize>,
    pub rotation_blocks: Vec<RotationBlock>,
}

impl JordanStructure {
    pub fn dim(&self) -> usize {
        self.nilpotent_sizes.iter().sum::<usize>()
            + 2 * self
                .rotation_blocks
                .iter()
                .map(|r| r.half_size)
                .sum::<usize>()
    }

    /// Number of coordinates carried by the nilpotent part.
    pub fn nilpotent_dim(&self) -> usize {
        self.nilpotent_sizes.iter().sum()
    }

    /// Checks internal consistency and that the assembled block matrix
    /// reproduces `spec`'s drift transpose entrywise.
    pub fn validate(&self, spec: &OperatorSpec) -> Result<()> {
        if self.nilpotent_sizes.contains(&0)
            || self.rotation_blocks.iter().any(|r| r.half_size == 0)
        {
            return Err(Error::invalid(
                "structure blocks must be nonempty".to_string(),
            ));
        }
        let freqs: Vec<f64> = self.rotation_blocks.iter().map(|r| r.frequency).collect();
        if freqs.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::invalid(
                "rotation frequencies must be strictly positive".to_string(),
            ));
        }
        if freqs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid(
                "rotation frequencies must be sorted ascending".to_string(),
            ));
        }
        if self.dim() != spec.dim() {
            return Err(Error::invalid(format!(
                "structure dimension {} does not match operator dimension {}",
                self.dim(),
                spec.dim()
            )));
        }
        let assembled = self.assemble_b_transpose();
        let defect = linalg::max_abs_diff(&assembled, &spec.b().transpose());
        if defect > STRUCTURE_MATCH_TOL {
            return Err(Error::invalid(format!(
                "declared structure mismatches drift transpose of '{}' by {defect:.3e}",
                spec.name()
            )));
        }
        Ok(())
    }

    /// Block-diagonal canonical form of the drift transpose.
    pub fn assemble_b_transpose(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut bt = DMatrix::zeros(n, n);
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            for i in 0..size.saturating_sub(1) {
                bt[(at + i, at + i + 1)] = 1.0;
            }
            at += size;
        }
        for block in &self.rotation_blocks {
            let b = block.frequency;
            for cell in 0..block.half_size {
                let r = at + 2 * cell;
                bt[(r, r + 1)] = -b;
                bt[(r + 1, r)] = b;
                if cell + 1 < block.half_size {
                    bt[(r, r + 2)] = 1.0;
                    bt[(r + 1, r + 3)] = 1.0;
                }
            }
            at += 2 * block.half_size;
        }
        bt
    }

    /// Diagonal of the anisotropic dilation: a coordinate at depth `k`
    /// (0-based) inside its block scales by `r^(2k+1)`.
    pub fn dilation_diag(&self, r: f64) -> DVector<f64> {
        let mut diag = DVector::zeros(self.dim());
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            for k in 0..size {
                diag[at + k] = r.powi(2 * k as i32 + 1);
            }
            at += size;
        }
        for block in &self.rotation_blocks {
            for k in 0..block.half_size {
                let v = r.powi(2 * k as i32 + 1);
                diag[at + 2 * k] = v;
                diag[at + 2 * k + 1] = v;
            }
            at += 2 * block.half_size;
        }
        diag
    }

    /// Diagonal of `dil(1/sqrt t) * sqrt t`: weight `t^-k` at depth `k`,
    /// computed as an exact integer power so depth-zero weights are exactly
    /// one.
    pub fn depth_weight_diag(&self, t: f64) -> DVector<f64> {
        let mut diag = DVector::zeros(self.dim());
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            for k in 0..size {
                diag[at + k] = t.powi(-(k as i32));
            }
            at += size;
        }
        for block in &self.rotation_blocks {
            for k in 0..block.half_size {
                let v = t.powi(-(k as i32));
                diag[at + 2 * k] = v;
                diag[at + 2 * k + 1] = v;
            }
            at += 2 * block.half_size;
        }
        diag
    }

    /// Diagonal of the limit projector: one on the leading coordinate(s) of
    /// every block, zero elsewhere.
    pub fn limit_projector_diag(&self) -> DVector<f64> {
        let mut diag = DVector::zeros(self.dim());
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            diag[at] = 1.0;
            at += size;
        }
        for block in &self.rotation_blocks {
            diag[at] = 1.0;
            diag[at + 1] = 1.0;
            at += 2 * block.half_size;
        }
        diag
    }

    /// Coordinate ranges: `(offset, len)` of each nilpotent block followed by
    /// each rotation block.
    #[allow(clippy::type_complexity)]
    fn block_ranges(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let mut nil = Vec::new();
        let mut rot = Vec::new();
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            nil.push((at, size));
            at += size;
        }
        for block in &self.rotation_blocks {
            rot.push((at, 2 * block.half_size));
            at += 2 * block.half_size;
        }
        (nil, rot)
    }

    /// Closed form of `exp(-sigma * Bt^T)` where `Bt` carries frequencies
    /// scaled by `t_scale`: upper-triangular Toeplitz blocks with entries
    /// `(-sigma)^k / k!`, tensored with a rotation on each rotation block.
    pub fn exp_canonical(&self, t_scale: f64, sigma: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        let mut at = 0;
        for &size in &self.nilpotent_sizes {
            let mut coef = 1.0;
            for k in 0..size {
                if k > 0 {
                    coef *= -sigma / k as f64;
                }
                for i in 0..size - k {
                    out[(at + i, at + i + k)] = coef;
                }
            }
            at += size;
        }
        for block in &self.rotation_blocks {
            let phase = sigma * t_scale * block.frequency;
            let (sin, cos) = phase.sin_cos();
            let mut coef = 1.0;
            for k in 0..block.half_size {
                if k > 0 {
                    coef *= -sigma / k as f64;
                }
                for i in 0..block.half_size - k {
                    let (r, c) = (at + 2 * i, at + 2 * (i + k));
                    out[(r, c)] = coef * cos;
                    out[(r, c + 1)] = coef * sin;
                    out[(r + 1, c)] = -coef * sin;
                    out[(r + 1, c + 1)] = coef * cos;
                }
            }
            at += 2 * block.half_size;
        }
        out
    }

    /// Largest declared frequency, zero when there are no rotation blocks.
    fn max_frequency(&self) -> f64 {
        self.rotation_blocks
            .iter()
            .map(|r| r.frequency)
            .fold(0.0, f64::max)
    }
}

/// Derived large-time data for a structured operator.
#[derive(Debug, Clone)]
pub struct AsymptoticBundle {
    pub structure: JordanStructure,
    /// Projector onto the leading coordinate(s) of every block.
    pub d_limit: DMatrix<f64>,
    /// `d_limit * A * d_limit`: the diffusion seen by the limit operator.
    pub a_limit: DMatrix<f64>,
    /// Distinct rotation frequencies, ascending.
    pub frequencies: Vec<f64>,
    /// Orthogonal group projectors: index 0 collects all nilpotent
    /// coordinates (zero matrix when there are none), then one projector per
    /// distinct frequency.  They are mutually orthogonal and sum to the
    /// identity.
    pub projectors: Vec<DMatrix<f64>>,
    /// `sum_j P_j A P_j`: the group-diagonal part of the diffusion.
    pub a_block: DMatrix<f64>,
    /// `d_limit (A - a_block) d_limit`: cross-group coupling, the part whose
    /// averaged contribution decays like `1/t`.
    pub cross_coupling: DMatrix<f64>,
    /// Spectral gap of each group's leading sub-block (infinite for an empty
    /// group slot).
    pub group_gaps: Vec<f64>,
    /// Uniform lower bound assembled from the group gaps.
    pub lambda0: f64,
    /// Largest eigenvalue of the diffusion matrix.
    pub lambda_max_a: f64,
    /// Covariance at time one of the pair `(d_limit, B)`; positive definite
    /// exactly when the limit operator is hypoelliptic.
    pub c_limit_1: DMatrix<f64>,
}

/// Builds the large-time bundle; the structure must match the operator.
pub fn build_asymptotic_bundle(
    spec: &OperatorSpec,
    structure: &JordanStructure,
) -> Result<AsymptoticBundle> {
    structure.validate(spec)?;
    let n = spec.dim();
    let d_diag = structure.limit_projector_diag();
    let d_limit = DMatrix::from_diagonal(&d_diag);
    let a_limit = &d_limit * spec.a() * &d_limit;

    let (nil_ranges, rot_ranges) = structure.block_ranges();
    // Distinct frequencies with the rotation blocks carrying them.
    let mut frequencies: Vec<f64> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new(); // indices into rot_ranges
    for (i, block) in structure.rotation_blocks.iter().enumerate() {
        match frequencies.last() {
            Some(&f) if f == block.frequency => groups.last_mut().unwrap().push(i),
            _ => {
                frequencies.push(block.frequency);
                groups.push(vec![i]);
            }
        }
    }

    let mut projectors = Vec::with_capacity(1 + frequencies.len());
    let mut proj0 = DMatrix::zeros(n, n);
    for &(at, len) in &nil_ranges {
        for i in at..at + len {
            proj0[(i, i)] = 1.0;
        }
    }
    projectors.push(proj0);
    for group in &groups {
        let mut proj = DMatrix::zeros(n, n);
        for &bi in group {
            let (at, len) = rot_ranges[bi];
            for i in at..at + len {
                proj[(i, i)] = 1.0;
            }
        }
        projectors.push(proj);
    }

    let mut a_block = DMatrix::zeros(n, n);
    for proj in &projectors {
        a_block += proj * spec.a() * proj;
    }
    let cross_coupling = &d_limit * (spec.a() - &a_block) * &d_limit;

    // Leading-coordinate index sets per group.
    let nil_leading: Vec<usize> = nil_ranges.iter().map(|&(at, _)| at).collect();
    let mut group_gaps = Vec::with_capacity(projectors.len());
    let gap0 = if nil_leading.is_empty() {
        f64::INFINITY
    } else {
        let sub = submatrix(spec.a(), &nil_leading);
        let gap = linalg::sym_eigen_min(&sub);
        if gap <= 0.0 {
            return Err(Error::violation(format!(
                "leading nilpotent diffusion block of '{}' is degenerate (gap {gap:.3e})",
                spec.name()
            )));
        }
        gap
    };
    group_gaps.push(gap0);
    let drifted = spec.a() + spec.b() * spec.a() * spec.b().transpose();
    for (j, group) in groups.iter().enumerate() {
        let mut leading = Vec::new();
        for &bi in group {
            let (at, _) = rot_ranges[bi];
            leading.push(at);
            leading.push(at + 1);
        }
        let sub = submatrix(&drifted, &leading);
        let gap = linalg::sym_eigen_min(&sub);
        if gap <= 0.0 {
            return Err(Error::violation(format!(
                "leading rotation block (frequency {}) of '{}' is degenerate (gap {gap:.3e})",
                frequencies[j],
                spec.name()
            )));
        }
        group_gaps.push(gap);
    }

    let mut lambda0 = group_gaps[0];
    for (j, &freq) in frequencies.iter().enumerate() {
        let scaled = group_gaps[j + 1] / (2.0 * freq.powi(2).max(1.0));
        lambda0 = lambda0.min(scaled);
    }
    if !lambda0.is_finite() || lambda0 <= 0.0 {
        return Err(Error::violation(format!(
            "no positive uniform gap for '{}'",
            spec.name()
        )));
    }

    // Covariance at time one of the limit pair; its Cholesky is the
    // certificate that ker(d_limit) holds no drift-invariant subspace.
    let limit_spec = OperatorSpec::new(
        format!("{}~limit", spec.name()),
        d_limit.clone(),
        spec.b().clone(),
    )?;
    if !limit_spec.is_hypoelliptic() {
        return Err(Error::violation(format!(
            "limit projector of '{}' leaves a drift-invariant kernel",
            spec.name()
        )));
    }
    let c_limit_1 = crate::covariance::covariance_bundle(&limit_spec, 1.0)?.c;

    Ok(AsymptoticBundle {
        structure: structure.clone(),
        d_limit,
        a_limit,
        frequencies,
        projectors,
        a_block,
        cross_coupling,
        group_gaps,
        lambda0,
        lambda_max_a: linalg::sym_eigen_max(spec.a()),
        c_limit_1,
    })
}

fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Worst entrywise residual of the two per-block dilation identities
///
/// ```text
///     exp(-sigma r^2 J)      = dil(1/r) exp(-sigma J)          dil(r)
///     exp(-sigma r^2 C_m(b)) = dil(1/r) exp(-sigma C_m(r^2 b)) dil(r)
/// ```
///
/// sampled over `r` in `[0.1, 10]` (log-spaced) and `sigma` in `[-5, 5]`.
/// Both sides go through the generic matrix exponential.
#[derive(Debug, Clone)]
pub struct DilationReport {
    pub worst_residual: f64,
    pub worst_block: String,
    pub samples: usize,
}

pub fn verify_dilation_identities(
    structure: &JordanStructure,
    r_count: usize,
    sigma_count: usize,
) -> Result<DilationReport> {
    if r_count < 2 || sigma_count < 2 {
        return Err(Error::invalid(
            "need at least 2 samples per axis".to_string(),
        ));
    }
    let rs = quadrature::log_spaced(0.1, 10.0, r_count);
    let sigmas: Vec<f64> = (0..sigma_count)
        .map(|i| -5.0 + 10.0 * i as f64 / (sigma_count - 1) as f64)
        .collect();
    let mut worst = 0.0f64;
    let mut worst_block = String::new();
    let mut samples = 0;

    let check = |gen_lhs: &DMatrix<f64>,
                 gen_rhs: &DMatrix<f64>,
                 dil: &JordanStructure,
                 label: &str,
                 r: f64,
                 sigma: f64,
                 worst: &mut f64,
                 worst_block: &mut String|
     -> Result<()> {
        let lhs = linalg::mat_exp(gen_lhs, -sigma * r * r)?;
        let inner = linalg::mat_exp(gen_rhs, -sigma)?;
        let dl = DMatrix::from_diagonal(&dil.dilation_diag(1.0 / r));
        let dr = DMatrix::from_diagonal(&dil.dilation_diag(r));
        let rhs = dl * inner * dr;
        let res = linalg::max_abs_diff(&lhs, &rhs);
        if res > *worst {
            *worst = res;
            *worst_block = format!("{label} at r={r:.3}, sigma={sigma:.3}");
        }
        Ok(())
    };

    for &size in &structure.nilpotent_sizes {
        let single = JordanStructure {
            nilpotent_sizes: vec![size],
            rotation_blocks: vec![],
        };
        let j = single.assemble_b_transpose();
        for &r in &rs {
            for &sigma in &sigmas {
                check(
                    &j,
                    &j,
                    &single,
                    &format!("nilpotent[{size}]"),
                    r,
                    sigma,
                    &mut worst,
                    &mut worst_block,
                )?;
                samples += 1;
            }
        }
    }
    for block in &structure.rotation_blocks {
        for &r in &rs {
            let base = JordanStructure {
                nilpotent_sizes: vec![],
                rotation_blocks: vec![*block],
            };
            let scaled = JordanStructure {
                nilpotent_sizes: vec![],
                rotation_blocks: vec![RotationBlock {
                    half_size: block.half_size,
                    frequency: block.frequency * r * r,
                }],
            };
            let gen_lhs = base.assemble_b_transpose();
            let gen_rhs = scaled.assemble_b_transpose();
            for &sigma in &sigmas {
                let label = format!("rotation[{}x2, b={}]", block.half_size, block.frequency);
                check(
                    &gen_lhs,
                    &gen_rhs,
                    &base,
                    &label,
                    r,
                    sigma,
                    &mut worst,
                    &mut worst_block,
                )?;
                samples += 1;
            }
        }
    }
    Ok(DilationReport {
        worst_residual: worst,
        worst_block,
        samples,
    })
}

/// `int_0^1 W(sigma)^T X W(sigma) d sigma` for `W(sigma) = exp(-sigma Bt)`,
/// evaluated for several `X` at once on a shared composite Gauss-Legendre
/// grid fine enough for the oscillation at scale `t`.
fn sigma_integrals(
    structure: &JordanStructure,
    t_scale: f64,
    xs: &[&DMatrix<f64>],
    panels: usize,
) -> Vec<DMatrix<f64>> {
    let n = structure.dim();
    let (nodes, weights) = quadrature::gauss_legendre(8);
    let mut totals = vec![DMatrix::zeros(n, n); xs.len()];
    let h = 1.0 / panels as f64;
    for k in 0..panels {
        let mid = h * (k as f64 + 0.5);
        for (x_node, w_node) in nodes.iter().zip(weights.iter()) {
            let sigma = mid + 0.5 * h * x_node;
            // W = exp(-sigma Bt) is the transpose of the canonical form for Bt^T.
            let w = structure.exp_canonical(t_scale, sigma).transpose();
            let scale = w_node * 0.5 * h;
            for (total, x) in totals.iter_mut().zip(xs.iter()) {
                *total += w.transpose() * *x * &w * scale;
            }
        }
    }
    totals
}

fn panel_count(structure: &JordanStructure, t_scale: f64) -> usize {
    let phase = t_scale * structure.max_frequency();
    ((phase / std::f64::consts::PI).ceil() as usize).max(8)
}

/// Runs the sigma integrals at the standard and doubled panel counts and
/// fails if they disagree beyond roundoff growth.
fn checked_sigma_integrals(
    structure: &JordanStructure,
    t_scale: f64,
    xs: &[&DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    let panels = panel_count(structure, t_scale);
    let coarse = sigma_integrals(structure, t_scale, xs, panels);
    let fine = sigma_integrals(structure, t_scale, xs, 2 * panels);
    for (c, f) in coarse.iter().zip(fine.iter()) {
        let scale = f.amax().max(1e-30);
        let diff = linalg::max_abs_diff(c, f);
        if diff > PANEL_DOUBLING_TOL * scale {
            return Err(Error::Quadrature(format!(
                "sigma integral at t={t_scale} moved by {diff:.3e} (scale {scale:.3e}) under panel doubling"
            )));
        }
    }
    Ok(fine)
}

/// Deficit of the averaged coercivity claim
/// `int <A_lim W v, W v> >= lambda0 int |d_limit W v|^2 - K/t |v|^2`,
/// reported as `t * max(0, lambda0 * rhs - lhs)` over unit `v` samples.
#[derive(Debug, Clone)]
pub struct ClaimStructureReport {
    pub t_grid: Vec<f64>,
    pub deficits: Vec<f64>,
    pub max_deficit: f64,
    /// True when decade-bucket maxima of the deficit grow by at most 3x per
    /// decade.
    pub envelope_bounded: bool,
}

pub fn verify_claim_structure(
    spec: &OperatorSpec,
    bundle: &AsymptoticBundle,
    t_grid: &[f64],
    v_count: usize,
    seed: u64,
) -> Result<ClaimStructureReport> {
    bundle.structure.validate(spec)?;
    if t_grid.iter().any(|&t| t < 1.0) {
        return Err(Error::invalid(
            "claim-structure grid requires t >= 1".to_string(),
        ));
    }
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vs: Vec<DVector<f64>> = (0..v_count.max(1))
        .map(|_| sample::unit_vector(n, &mut rng))
        .collect();
    let mut deficits = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let forms =
            checked_sigma_integrals(&bundle.structure, t, &[&bundle.a_limit, &bundle.d_limit])?;
        let (sig_a, sig_d) = (&forms[0], &forms[1]);
        let mut worst = 0.0f64;
        for v in &vs {
            let lhs = (sig_a * v).dot(v);
            let rhs = (sig_d * v).dot(v);
            worst = worst.max((bundle.lambda0 * rhs - lhs).max(0.0));
        }
        deficits.push(worst * t);
    }
    let max_deficit = deficits.iter().copied().fold(0.0, f64::max);
    let envelope_bounded = decade_envelope_bounded(t_grid, &deficits, 3.0);
    Ok(ClaimStructureReport {
        t_grid: t_grid.to_vec(),
        deficits,
        max_deficit,
        envelope_bounded,
    })
}

/// Residuals of the three averaging statements behind the large-time limit:
/// cross-group coupling washes out, drift-conjugated group blocks average to
/// their frequency-scaled versions, and the dilated diffusion converges to
/// the limit diffusion.  Each residual carries an `O(1/t)` bound.
#[derive(Debug, Clone)]
pub struct OscillatoryDecayReport {
    pub t_grid: Vec<f64>,
    /// Spectral norm of the averaged cross-coupling form, per `t`.
    pub cross_residuals: Vec<f64>,
    /// Worst frequency-group mismatch of the averaged drift-conjugated
    /// diffusion, per `t`.
    pub flip_residuals: Vec<f64>,
    /// `t * ||A_t - a_limit||`, per `t`.
    pub limit_residuals: Vec<f64>,
    /// Log-log slope of half-decade bucket maxima, when the residual is not
    /// identically negligible.
    pub cross_slope: Option<f64>,
    pub flip_slope: Option<f64>,
    pub limit_bounded: bool,
}

pub fn verify_oscillatory_decay(
    spec: &OperatorSpec,
    bundle: &AsymptoticBundle,
    t_grid: &[f64],
) -> Result<OscillatoryDecayReport> {
    bundle.structure.validate(spec)?;
    if t_grid.iter().any(|&t| t < 1.0) {
        return Err(Error::invalid(
            "oscillatory-decay grid requires t >= 1".to_string(),
        ));
    }
    let structure = &bundle.structure;
    // Fixed matrices entering the averaged forms.
    let drifted = spec.b() * spec.a() * spec.b().transpose();
    let mut flip_pairs: Vec<(DMatrix<f64>, DMatrix<f64>, f64)> = Vec::new();
    for (j, &freq) in bundle.frequencies.iter().enumerate() {
        let proj = &bundle.projectors[j + 1];
        let left = &bundle.d_limit * proj * &drifted * proj * &bundle.d_limit;
        let right = &bundle.d_limit * proj * spec.a() * proj * &bundle.d_limit;
        flip_pairs.push((left, right, freq));
    }

    let mut cross_residuals = Vec::with_capacity(t_grid.len());
    let mut flip_residuals = Vec::with_capacity(t_grid.len());
    let mut limit_residuals = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut xs: Vec<&DMatrix<f64>> = vec![&bundle.cross_coupling];
        for (l, r, _) in &flip_pairs {
            xs.push(l);
            xs.push(r);
        }
        let forms = checked_sigma_integrals(structure, t, &xs)?;
        let (lo, hi) = linalg::sym_eigen_range(&forms[0]);
        cross_residuals.push(lo.abs().max(hi.abs()));
        let mut worst_flip = 0.0f64;
        for (j, (_, _, freq)) in flip_pairs.iter().enumerate() {
            let diff = &forms[1 + 2 * j] - &forms[2 + 2 * j] * freq.powi(2);
            let (lo, hi) = linalg::sym_eigen_range(&diff);
            worst_flip = worst_flip.max(lo.abs().max(hi.abs()));
        }
        flip_residuals.push(worst_flip);
        // A_t = D_t A D_t with D_t the depth-wise power scaling.
        let d_t = DMatrix::from_diagonal(&structure.depth_weight_diag(t));
        let a_t = &d_t * spec.a() * &d_t;
        limit_residuals.push(t * linalg::max_abs_diff(&a_t, &bundle.a_limit));
    }
    Ok(OscillatoryDecayReport {
        t_grid: t_grid.to_vec(),
        cross_slope: bucketed_slope(t_grid, &cross_residuals),
        flip_slope: bucketed_slope(t_grid, &flip_residuals),
        limit_bounded: decade_envelope_bounded(t_grid, &limit_residuals, 3.0),
        cross_residuals,
        flip_residuals,
        limit_residuals,
    })
}

/// Per-decade envelope maxima must not grow by more than `factor` from one
/// decade to the next.
fn decade_envelope_bounded(t_grid: &[f64], values: &[f64], factor: f64) -> bool {
    let maxima = bucket_maxima(t_grid, values, 1.0);
    maxima.windows(2).all(|w| w[1].1 <= factor * w[0].1 + 1e-12)
}

/// `(bucket center t, bucket max)` with buckets of `width` decades.
fn bucket_maxima(t_grid: &[f64], values: &[f64], width: f64) -> Vec<(f64, f64)> {
    let mut buckets: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for (&t, &v) in t_grid.iter().zip(values.iter()) {
        let idx = (t.log10() / width).floor() as i64;
        let entry = buckets.entry(idx).or_insert((0.0, 0.0));
        entry.1 = entry.1.max(v);
        entry.0 = 10f64.powf((idx as f64 + 0.5) * width);
    }
    buckets.into_values().collect()
}

/// Least-squares log-log slope of half-decade bucket maxima; `None` when the
/// residuals are negligible throughout (no decay law to fit).
fn bucketed_slope(t_grid: &[f64], values: &[f64]) -> Option<f64> {
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak < 1e-13 {
        return None;
    }
    let pts: Vec<(f64, f64)> = bucket_maxima(t_grid, values, 0.5)
        .into_iter()
        .filter(|&(_, v)| v > 1e-300)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
}

/// Two-sided comparison of the twisted covariance with the dilated norm:
/// above the discovered threshold every sampled direction satisfies
///
/// ```text
///     (lambda0 chat / 2) |dil(sqrt t) xi|^2
///         <= <M(t) xi, xi>
///         <= 2 Lambda0 Chat |dil(sqrt t) xi|^2,
/// ```
///
/// with `chat`, `Chat` the extreme eigenvalues of the limit covariance.
#[derive(Debug, Clone)]
pub struct SandwichReport {
    /// Smallest grid time from which both bounds held for every sample.
    pub threshold_t: Option<f64>,
    pub lower_constant: f64,
    pub upper_constant: f64,
    /// Worst ratios observed at or above the threshold.
    pub worst_lower_ratio: f64,
    pub worst_upper_ratio: f64,
}

pub fn verify_sandwich(
    store: &CovarianceStore,
    bundle: &AsymptoticBundle,
    t_grid: &[f64],
    xi_count: usize,
    seed: u64,
) -> Result<SandwichReport> {
    if t_grid.iter().any(|&t| t < 1.0) {
        return Err(Error::invalid("sandwich grid requires t >= 1".to_string()));
    }
    let n = store.dim();
    let (chat, cap_chat) = linalg::sym_eigen_range(&bundle.c_limit_1);
    let lower_constant = 0.5 * bundle.lambda0 * chat;
    let upper_constant = 2.0 * bundle.lambda_max_a * cap_chat;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xis: Vec<DVector<f64>> = (0..xi_count.max(1))
        .map(|_| sample::unit_vector(n, &mut rng))
        .collect();

    // ok[i] = both bounds hold at t_grid[i] for all samples; the threshold is
    // the start of the trailing all-ok run.
    let slack = 1.0 + 1e-9;
    let mut ratios: Vec<(f64, f64, bool)> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let m = &store.bundle(t)?.m;
        let dil = bundle.structure.dilation_diag(t.sqrt());
        let mut lower_ratio = f64::INFINITY;
        let mut upper_ratio = f64::INFINITY;
        for xi in &xis {
            let q = (m * xi).dot(xi);
            let scaled: f64 = xi
                .iter()
                .zip(dil.iter())
                .map(|(x, d)| (x * d) * (x * d))
                .sum();
            lower_ratio = lower_ratio.min(q / (lower_constant * scaled));
            upper_ratio = upper_ratio.min(upper_constant * scaled / q);
        }
        let ok = lower_ratio * slack >= 1.0 && upper_ratio * slack >= 1.0;
        ratios.push((lower_ratio, upper_ratio, ok));
    }
    let mut threshold_idx = None;
    for i in (0..ratios.len()).rev() {
        if ratios[i].2 {
            threshold_idx = Some(i);
        } else {
            break;
        }
    }
    let (mut worst_lower, mut worst_upper) = (f64::INFINITY, f64::INFINITY);
    if let Some(idx) = threshold_idx {
        for r in &ratios[idx..] {
            worst_lower = worst_lower.min(r.0);
            worst_upper = worst_upper.min(r.1);
        }
    }
    Ok(SandwichReport {
        threshold_t: threshold_idx.map(|i| t_grid[i]),
        lower_constant,
        upper_constant,
        worst_lower_ratio: worst_lower,
        worst_upper_ratio: worst_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use approx::assert_relative_eq;

    #[test]
    fn structure_validation_catches_mismatches() {
        let wrong_freq = JordanStructure {
            nilpotent_sizes: vec![],
            rotation_blocks: vec![RotationBlock {
                half_size: 1,
                frequency: 2.0,
            }],
        };
        assert!(wrong_freq.validate(&models::rotation()).is_err());
        let wrong_shape = JordanStructure {
            nilpotent_sizes: vec![1, 1],
            rotation_blocks: vec![],
        };
        assert!(wrong_shape.validate(&models::kolmogorov()).is_err());
        let unsorted = JordanStructure {
            nilpotent_sizes: vec![],
            rotation_blocks: vec![
                RotationBlock {
                    half_size: 1,
                    frequency: 2.0,
                },
                RotationBlock {
                    half_size: 1,
                    frequency: 1.0,
                },
            ],
        };
        assert!(matches!(
            unsorted.validate(&models::mix()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn canonical_exponential_matches_generic() {
        // Closed form against the Pade route on a mixed structure.
        let structure = JordanStructure {
            nilpotent_sizes: vec![3],
            rotation_blocks: vec![RotationBlock {
                half_size: 2,
                frequency: 1.5,
            }],
        };
        let bt = structure.assemble_b_transpose();
        for &(t, sigma) in &[(1.0, 0.3), (7.0, 0.9), (50.0, 0.11)] {
            let scaled = JordanStructure {
                nilpotent_sizes: structure.nilpotent_sizes.clone(),
                rotation_blocks: structure
                    .rotation_blocks
                    .iter()
                    .map(|b| RotationBlock {
                        half_size: b.half_size,
                        frequency: b.frequency * t,
                    })
                    .collect(),
            };
            let generic = linalg::mat_exp(&scaled.assemble_b_transpose(), -sigma).unwrap();
            let closed = structure.exp_canonical(t, sigma);
            assert!(
                linalg::max_abs_diff(&generic, &closed) < 1e-11,
                "closed form drifted at t={t}, sigma={sigma}"
            );
            let _ = &bt;
        }
    }

    #[test]
    fn kolmogorov_limit_covariance_closed_form() {
        let bundle =
            build_asymptotic_bundle(&models::kolmogorov(), &models::kolmogorov_structure())
                .unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0 / 3.0]);
        assert!(linalg::max_abs_diff(&bundle.c_limit_1, &expected) < 1e-12);
        let det = bundle.c_limit_1[(0, 0)] * bundle.c_limit_1[(1, 1)]
            - bundle.c_limit_1[(0, 1)] * bundle.c_limit_1[(1, 0)];
        assert_relative_eq!(det, 1.0 / 12.0, max_relative = 1e-12);
        assert_eq!(
            bundle.d_limit,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])
        );
        assert_relative_eq!(bundle.lambda0, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn heat_bundle_is_trivial() {
        let bundle = build_asymptotic_bundle(&models::heat(2), &models::heat_structure(2)).unwrap();
        assert_eq!(bundle.d_limit, DMatrix::identity(2, 2));
        assert_eq!(bundle.a_limit, DMatrix::identity(2, 2));
        assert!(bundle.cross_coupling.amax() < 1e-15);
        assert!(linalg::max_abs_diff(&bundle.c_limit_1, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn rotation_bundle_gap() {
        let bundle =
            build_asymptotic_bundle(&models::rotation(), &models::rotation_structure()).unwrap();
        // Group gap 2 scaled by 2 max(1, b^2) gives 1.
        assert_relative_eq!(bundle.lambda0, 1.0, max_relative = 1e-12);
        assert!(linalg::max_abs_diff(&bundle.c_limit_1, &DMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn projectors_are_an_orthogonal_resolution() {
        let bundle = build_asymptotic_bundle(&models::mix(), &models::mix_structure()).unwrap();
        let n = 4;
        let mut total = DMatrix::zeros(n, n);
        for (i, p) in bundle.projectors.iter().enumerate() {
            assert!(
                linalg::max_abs_diff(&(p * p), p) < 1e-12,
                "P{i} not idempotent"
            );
            for (j, q) in bundle.projectors.iter().enumerate() {
                if i != j {
                    assert!((p * q).amax() < 1e-12, "P{i} P{j} != 0");
                }
            }
            total += p;
        }
        assert!(linalg::max_abs_diff(&total, &DMatrix::identity(n, n)) < 1e-12);
    }

    #[test]
    fn mix_cross_coupling_is_offdiagonal_part() {
        let bundle = build_asymptotic_bundle(&models::mix(), &models::mix_structure()).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 0.4, 0.0, //
                0.0, 0.0, 0.0, 0.2, //
                0.4, 0.0, 0.0, 0.0, //
                0.0, 0.2, 0.0, 0.0,
            ],
        );
        assert!(linalg::max_abs_diff(&bundle.cross_coupling, &expected) < 1e-15);
    }

    #[test]
    fn dilation_identities_hold_on_builtins() {
        for structure in [
            models::heat_structure(2),
            models::rotation_structure(),
            models::kolmogorov_structure(),
            models::mix_structure(),
        ] {
            let report = verify_dilation_identities(&structure, 7, 9).unwrap();
            assert!(
                report.worst_residual <= 1e-9,
                "residual {:.3e} at {}",
                report.worst_residual,
                report.worst_block
            );
        }
    }

    #[test]
    fn dilation_identity_closed_form_example() {
        // Size-2 nilpotent block, r=2, sigma=1: left side has entry -4.
        let structure = JordanStructure {
            nilpotent_sizes: vec![2],
            rotation_blocks: vec![],
        };
        let j = structure.assemble_b_transpose();
        let lhs = linalg::mat_exp(&j, -4.0).unwrap();
        assert_relative_eq!(lhs[(0, 1)], -4.0, max_relative = 1e-13);
        let dl = DMatrix::from_diagonal(&structure.dilation_diag(0.5));
        let dr = DMatrix::from_diagonal(&structure.dilation_diag(2.0));
        let rhs = dl * linalg::mat_exp(&j, -1.0).unwrap() * dr;
        assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-13);
    }

    #[test]
    fn claim_structure_deficit_zero_for_isotropic_models() {
        // With A = I and a single frequency the averaged coercivity is an
        // identity, so the deficit vanishes.
        let spec = models::rotation();
        let bundle = build_asymptotic_bundle(&spec, &models::rotation_structure()).unwrap();
        let grid = quadrature::log_spaced(10.0, 1e3, 12);
        let report = verify_claim_structure(&spec, &bundle, &grid, 6, 11).unwrap();
        assert!(
            report.max_deficit < 1e-9,
            "deficit {:.3e}",
            report.max_deficit
        );
        assert!(report.envelope_bounded);
    }

    #[test]
    fn kolmogorov_claim_structure_bounded() {
        let spec = models::kolmogorov();
        let bundle = build_asymptotic_bundle(&spec, &models::kolmogorov_structure()).unwrap();
        let grid = quadrature::log_spaced(10.0, 1e3, 12);
        let report = verify_claim_structure(&spec, &bundle, &grid, 6, 13).unwrap();
        assert!(report.envelope_bounded);
    }

    #[test]
    fn mix_residuals_decay_like_one_over_t() {
        let spec = models::mix();
        let bundle = build_asymptotic_bundle(&spec, &models::mix_structure()).unwrap();
        let grid = quadrature::log_spaced(10.0, 1e4, 90);
        let report = verify_oscillatory_decay(&spec, &bundle, &grid).unwrap();
        let cross = report.cross_slope.expect("cross residual not negligible");
        assert!((cross + 1.0).abs() <= 0.1, "cross slope {cross}");
        let flip = report.flip_slope.expect("flip residual not negligible");
        assert!((flip + 1.0).abs() <= 0.1, "flip slope {flip}");
        assert!(report.limit_bounded);
    }

    #[test]
    fn sandwich_holds_from_time_one_for_kolmogorov() {
        let store = CovarianceStore::new(models::kolmogorov()).unwrap();
        let bundle =
            build_asymptotic_bundle(&models::kolmogorov(), &models::kolmogorov_structure())
                .unwrap();
        let grid = quadrature::log_spaced(1.0, 1e5, 40);
        let report = verify_sandwich(&store, &bundle, &grid, 16, 21).unwrap();
        assert_eq!(report.threshold_t, Some(1.0));
        assert!(report.worst_lower_ratio >= 1.0 - 1e-9);
        assert!(report.worst_upper_ratio >= 1.0 - 1e-9);
    }
}
