//! Cross-module pass over the planar heat model using only the public API.
//! With a zero drift everything is closed-form (C(s) = sI, D(s) = s^2), so
//! each stage of the pipeline can be pinned tightly.

use nalgebra::DVector;

use kolmo_core::constants::{compute_constants, ConstantsConfig};
use kolmo_core::covariance::CovarianceStore;
use kolmo_core::geometry::onion_containment_check;
use kolmo_core::harnack::{make_solution, verify_harnack, verify_liouville_decay, FamilySpec};
use kolmo_core::kernel::{mean_value, MvfMethod, Onion, Point};
use kolmo_core::models;
use kolmo_core::operator::{classify_spectrum, SpectralClass};

#[test]
fn planar_heat_end_to_end() {
    let spec = models::heat(2);
    let structure = models::heat_structure(2);

    let spectrum = classify_spectrum(&spec).unwrap();
    assert!(spectrum.kalman.hypoelliptic);
    assert_eq!(spectrum.kalman.index, Some(0));
    assert_eq!(spectrum.class, SpectralClass::AllImaginary);
    assert!(spectrum.linf_liouville);

    let store = CovarianceStore::new(spec).unwrap();
    let bundle = store.bundle(1.5).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            let exact = if i == j { 1.5 } else { 0.0 };
            assert!((bundle.c[(i, j)] - exact).abs() <= 1e-12);
            assert!((bundle.m[(i, j)] - exact).abs() <= 1e-12);
        }
    }
    assert!((bundle.det() - 2.25).abs() <= 1e-12);

    let config = ConstantsConfig {
        t_max: 1e3,
        t_points: 60,
        ..ConstantsConfig::default()
    };
    let chain = compute_constants(&store, &structure, &config).unwrap();
    // D(2t)/D(t) = 4 identically; the small-time slope of lambda_min is 1.
    assert!((chain.c_doubling - 4.0).abs() <= 1e-9);
    assert_eq!(chain.expected_slope, 1.0);
    assert!((chain.lambda_min_slope - 1.0).abs() <= 0.1);
    assert_eq!(chain.p, 3);

    let z0 = Point::new(DVector::zeros(2), 0.0);
    let r = store.bundle(1.0).unwrap().log_volume_radius(3).exp();
    let onion = Onion::new(store.clone(), z0.clone(), 3, r).unwrap();
    let tensor = mean_value(&onion, &|_z: &Point| 1.0, &MvfMethod::default_tensor()).unwrap();
    assert!(
        (tensor.value - 1.0).abs() <= 2e-3,
        "tensor normalization {}",
        tensor.value
    );
    let mc = mean_value(
        &onion,
        &|_z: &Point| 1.0,
        &MvfMethod::MonteCarlo {
            strata: 32,
            samples_per_stratum: 256,
            seed: 5,
        },
    )
    .unwrap();
    let gap = (mc.value - 1.0).abs();
    assert!(
        gap <= (3.0 * mc.std_error.unwrap()).max(1e-2),
        "monte-carlo normalization off by {gap:.3e}"
    );

    let u = make_solution(
        &store,
        FamilySpec::Exponential {
            c0: DVector::from_vec(vec![1.0, 0.0]),
        },
    )
    .unwrap();
    let harnack = verify_harnack(&store, &chain, &u, &z0, 200, 9).unwrap();
    assert_eq!(harnack.violations, 0);

    let probes = [DVector::zeros(2), DVector::from_vec(vec![0.5, -0.25])];
    let decay = verify_liouville_decay(&u, &probes, None).unwrap();
    assert!(decay.pass);

    let x = &store.bundle(2.0).unwrap().chol_m * DVector::from_vec(vec![0.4, 0.3]);
    let containment = onion_containment_check(&store, &chain, &z0, -2.0, &x, 500, 11).unwrap();
    assert_eq!(containment.violations, 0);
}
