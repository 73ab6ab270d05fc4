//! Bundled example operators.
//!
//! Four named models exercise the full range of behaviors:
//!
//! * `heat(n)` -- nondegenerate diffusion, zero drift;
//! * `rotation` -- nondegenerate diffusion, planar rotation drift;
//! * `kolmogorov` -- rank-one diffusion completed by a nilpotent drift, the
//!   classic kinetic example;
//! * `mix` -- two rotation frequencies coupled through the diffusion matrix,
//!   which makes every oscillatory-averaging residual genuinely nonzero.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asymptotic::{JordanStructure, RotationBlock};
use crate::operator::OperatorSpec;

/// Isotropic diffusion in `n` variables with zero drift.
pub fn heat(n: usize) -> OperatorSpec {
    OperatorSpec::new(
        format!("heat{n}d"),
        DMatrix::identity(n, n),
        DMatrix::zeros(n, n),
    )
    .expect("heat model is valid")
}

pub fn heat_structure(n: usize) -> JordanStructure {
    JordanStructure {
        nilpotent_sizes: vec![1; n],
        rotation_blocks: vec![],
    }
}

/// Isotropic planar diffusion with unit-frequency rotation drift.  The drift
/// transpose is exactly the canonical rotation block.
pub fn rotation() -> OperatorSpec {
    OperatorSpec::new(
        "rotation",
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
    )
    .expect("rotation model is valid")
}

pub fn rotation_structure() -> JordanStructure {
    JordanStructure {
        nilpotent_sizes: vec![],
        rotation_blocks: vec![RotationBlock {
            half_size: 1,
            frequency: 1.0,
        }],
    }
}

/// Kinetic model: diffusion in velocity only, transport drift.  The drift
/// transpose is one nilpotent block of size two.
pub fn kolmogorov() -> OperatorSpec {
    OperatorSpec::new(
        "kolmogorov",
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
    )
    .expect("kolmogorov model is valid")
}

pub fn kolmogorov_structure() -> JordanStructure {
    JordanStructure {
        nilpotent_sizes: vec![2],
        rotation_blocks: vec![],
    }
}

/// Two rotation frequencies (1 and 2) with a diffusion that couples the
/// frequency groups and is anisotropic inside each group.  With an isotropic
/// diffusion every averaging residual would vanish identically; this choice
/// keeps them nonzero so their `1/t` decay is observable.
pub fn mix() -> OperatorSpec {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.3, 0.4, 0.0, //
            0.3, 1.5, 0.0, 0.2, //
            0.4, 0.0, 1.2, 0.1, //
            0.0, 0.2, 0.1, 0.8,
        ],
    );
    let b = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 1.0, 0.0, 0.0, //
            -1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 2.0, //
            0.0, 0.0, -2.0, 0.0,
        ],
    );
    OperatorSpec::new("mix", a, b).expect("mix model is valid")
}

pub fn mix_structure() -> JordanStructure {
    JordanStructure {
        nilpotent_sizes: vec![],
        rotation_blocks: vec![
            RotationBlock {
                half_size: 1,
                frequency: 1.0,
            },
            RotationBlock {
                half_size: 1,
                frequency: 2.0,
            },
        ],
    }
}

/// Seeded random 3x3 hypoelliptic pair: a positive semidefinite diffusion of
/// random rank 1..3 plus a random drift, resampled until the Kalman test
/// passes.
pub fn random_hypoelliptic_3x3(seed: u64) -> OperatorSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x8f9c_a72d_11e4_b001);
    loop {
        let rank = rng.gen_range(1..=3usize);
        let mut a = DMatrix::zeros(3, 3);
        for _ in 0..rank {
            let v = DMatrix::from_fn(3, 1, |_, _| rng.gen_range(-1.0..1.0));
            a += &v * v.transpose();
        }
        a = (&a + a.transpose()) * 0.5;
        let b = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        if let Ok(spec) = OperatorSpec::new(format!("random3x3-{seed}"), a, b) {
            if spec.is_hypoelliptic() {
                return spec;
            }
        }
    }
}
