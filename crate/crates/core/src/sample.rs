//! Deterministic sampling helpers.
//!
//! Every randomized check in the crate draws from a counter-mode generator
//! seeded from a user seed plus a stream index, so results are reproducible
//! across runs and independent across strata.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator for stratum `stream` of the experiment identified by `seed`.
/// Distinct streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard Gaussian vector.
pub fn gaussian_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Uniform direction on the unit sphere.
pub fn unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let g = gaussian_vector(dim, rng);
        let norm = g.norm();
        if norm > 1e-8 {
            return g / norm;
        }
    }
}

/// Uniform point in the closed unit ball: Gaussian direction with radius
/// `u^(1/dim)`, which makes the volume element uniform.
pub fn unit_ball<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    let dir = unit_vector(dim, rng);
    let u: f64 = rng.gen();
    dir * u.powf(1.0 / dim as f64)
}
