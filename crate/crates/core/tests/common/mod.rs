//! Shared fixtures and oracles for the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use pcflow::kahler::{validate_kahler, MetricState};
use pcflow::{build_sphere_geometry, build_torus_geometry, CosineMode, Geometry, ScalarField};

/// Low wavenumbers used to build smooth random torus fields.
pub const TORUS_MODES: [(i64, i64); 6] = [(1, 0), (0, 1), (1, 1), (2, -1), (0, 2), (3, 1)];

pub fn flat_torus(n: usize) -> Geometry {
    build_torus_geometry(n, n, 2.0 * PI, &[]).unwrap()
}

pub fn conformal_torus(n: usize) -> Geometry {
    build_torus_geometry(n, n, 2.0 * PI, &[CosineMode::new(1, 0, 0.2), CosineMode::new(0, 1, -0.1)]).unwrap()
}

pub fn sphere(nmu: usize) -> Geometry {
    build_sphere_geometry(nmu).unwrap()
}

/// `Σ c_j cos(k_j·x) + s_j sin(k_j·x)` over [`TORUS_MODES`] (torus) or
/// `Σ c_l P_l(2μ − 1)` (sphere); `coeffs` is cycled as needed.
pub fn smooth_field(geom: &Geometry, coeffs: &[f64]) -> ScalarField {
    assert!(!coeffs.is_empty());
    let c = |i: usize| coeffs[i % coeffs.len()];
    match geom {
        Geometry::Torus(t) => {
            let base = 2.0 * PI / t.length();
            t.sample(|x, y| {
                TORUS_MODES
                    .iter()
                    .enumerate()
                    .map(|(j, &(kx, ky))| {
                        let arg = base * (kx as f64 * x + ky as f64 * y);
                        c(2 * j) * arg.cos() + c(2 * j + 1) * arg.sin()
                    })
                    .sum()
            })
        }
        Geometry::Sphere(s) => s.sample(|mu| {
            let x = 2.0 * mu - 1.0;
            // P1..P4
            let p = [x, 0.5 * (3.0 * x * x - 1.0), 0.5 * (5.0 * x.powi(3) - 3.0 * x), (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0];
            p.iter().enumerate().map(|(l, v)| c(l) * v).sum()
        }),
    }
}

/// Rescales `u` so that `max |Δ₀u| = amplitude`, making `1 + Δ₀u ≥ 1 − amplitude`.
pub fn make_valid(geom: &Geometry, u: &ScalarField, amplitude: f64) -> ScalarField {
    let lap = geom.laplacian0(u).unwrap();
    let m = lap.sup_abs();
    if m == 0.0 {
        return u.clone();
    }
    u.scale(amplitude / m)
}

pub fn valid_state(geom: &Geometry, coeffs: &[f64], amplitude: f64) -> MetricState {
    let phi = make_valid(geom, &smooth_field(geom, coeffs), amplitude);
    validate_kahler(geom, &phi, 1e-6).unwrap()
}

/// Deterministic pseudo-random coefficient sets for "20 random states" checks.
pub fn coefficient_sets(count: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Periodic trapezoid rule on `[0, 2π)` with `n` points (spectrally accurate).
pub fn periodic_mean(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    (0..n).map(|i| f(2.0 * PI * i as f64 / n as f64)).sum::<f64>() / n as f64
}
