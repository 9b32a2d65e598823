mod common;

use common::*;
use pcflow::kahler::{laplacian_phi, rbar, scalar_curvature, validate_kahler};
use pcflow::Geometry;
use proptest::prelude::*;

/// Dyadic quantum: fine enough to keep the state valid, coarse enough that
/// adding a small integer is exact.
const Q: f64 = (1u64 << 30) as f64;

fn backends() -> Vec<Geometry> {
    vec![flat_torus(32), conformal_torus(64), sphere(128)]
}

#[test]
fn cohomology_invariance_on_random_states() {
    for g in backends() {
        let vol = g.volume();
        let rb = rbar(&g);
        for c in coefficient_sets(20, 12, 11) {
            let s = valid_state(&g, &c, 0.6);
            let r = scalar_curvature(&g, &s).unwrap();
            let total = g.integrate(&r.field, Some(&s.rho)).unwrap();
            assert!((total - rb * vol).abs() < 1e-8, "∫R ω_φ = {total}, expected {}", rb * vol);
            let mass = g.integrate(&s.rho, None).unwrap();
            assert!((mass - vol).abs() < 1e-8, "∫ω_φ = {mass}, Vol = {vol}");
        }
    }
}

#[test]
fn curvature_forms_agree_on_random_states() {
    for g in backends() {
        for c in coefficient_sets(20, 12, 12) {
            let s = valid_state(&g, &c, 0.6);
            let r = scalar_curvature(&g, &s).unwrap();
            assert!(r.discrepancy < 1e-8, "discrepancy {}", r.discrepancy);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Shifts by an integer are exact in floating point for dyadic data, so
    /// every derived quantity must be bitwise unchanged.
    #[test]
    fn constant_shift_changes_nothing(c in prop::collection::vec(-1.0..1.0f64, 12), k in -8i32..8) {
        for g in backends() {
            let phi = make_valid(&g, &smooth_field(&g, &c), 0.5).map(|v| (v * Q).round() / Q);
            let a = validate_kahler(&g, &phi, 1e-6).unwrap();
            let b = validate_kahler(&g, &phi.shift(k as f64), 1e-6).unwrap();
            prop_assert_eq!(&a.rho, &b.rho);
            prop_assert_eq!(&a.big_f, &b.big_f);
            let ra = scalar_curvature(&g, &a).unwrap().field;
            let rb = scalar_curvature(&g, &b).unwrap().field;
            prop_assert_eq!(ra, rb);
        }
    }

    #[test]
    fn laplacian_phi_is_self_adjoint(c in prop::collection::vec(-1.0..1.0f64, 12),
                                     cu in prop::collection::vec(-1.0..1.0f64, 12),
                                     cv in prop::collection::vec(-1.0..1.0f64, 12)) {
        for g in backends() {
            let s = valid_state(&g, &c, 0.6);
            let u = smooth_field(&g, &cu);
            let v = smooth_field(&g, &cv);
            let a = g.integrate(&(&v * &laplacian_phi(&g, &s, &u).unwrap()), Some(&s.rho)).unwrap();
            let b = g.integrate(&(&u * &laplacian_phi(&g, &s, &v).unwrap()), Some(&s.rho)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
            let total = g.integrate(&laplacian_phi(&g, &s, &u).unwrap(), Some(&s.rho)).unwrap();
            prop_assert!(total.abs() <= 1e-10);
        }
    }
}

#[test]
fn reference_curvatures() {
    let t = flat_torus(32);
    let s0 = validate_kahler(&t, &t.zeros(), 1e-6).unwrap();
    assert_eq!(scalar_curvature(&t, &s0).unwrap().field.sup_abs(), 0.0);
    assert_eq!(rbar(&t), 0.0);
    let sp = sphere(64);
    let s0 = validate_kahler(&sp, &sp.zeros(), 1e-6).unwrap();
    let r = scalar_curvature(&sp, &s0).unwrap().field;
    assert!(r.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
    assert!(rbar(&conformal_torus(64)).abs() < 1e-10);
}
