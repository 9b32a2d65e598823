//! Discretized model geometries in complex dimension one.
//!
//! Every backend exposes the same chart-level vocabulary: a reference density
//! `σ₀` with `ω₀ = i σ₀ dz∧dz̄`, the mixed derivative `∂z∂z̄`, the reference
//! Laplacian `Δ₀ = ∂z∂z̄/σ₀`, and quadrature against `ω₀` or the chart
//! measure `i dz∧dz̄`.

mod sphere;
mod torus;

pub use sphere::{SphereGeometry, MIN_NMU};
pub use torus::{CosineMode, TorusGeometry};

use crate::error::Result;
use crate::field::{GridShape, ScalarField};

#[derive(Clone, Debug)]
pub enum Geometry {
    Torus(TorusGeometry),
    Sphere(SphereGeometry),
}

impl From<TorusGeometry> for Geometry {
    fn from(g: TorusGeometry) -> Self {
        Geometry::Torus(g)
    }
}

impl From<SphereGeometry> for Geometry {
    fn from(g: SphereGeometry) -> Self {
        Geometry::Sphere(g)
    }
}

pub fn build_torus_geometry(nx: usize, ny: usize, length: f64, sigma0_modes: &[CosineMode]) -> Result<Geometry> {
    TorusGeometry::new(nx, ny, length, sigma0_modes).map(Geometry::Torus)
}

pub fn build_sphere_geometry(nmu: usize) -> Result<Geometry> {
    SphereGeometry::new(nmu).map(Geometry::Sphere)
}

impl Geometry {
    pub fn shape(&self) -> GridShape {
        match self {
            Geometry::Torus(g) => g.shape(),
            Geometry::Sphere(g) => g.shape(),
        }
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::zeros(self.shape())
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField::constant(self.shape(), c)
    }

    pub fn as_torus(&self) -> Option<&TorusGeometry> {
        match self {
            Geometry::Torus(g) => Some(g),
            Geometry::Sphere(_) => None,
        }
    }

    pub fn as_sphere(&self) -> Option<&SphereGeometry> {
        match self {
            Geometry::Sphere(g) => Some(g),
            Geometry::Torus(_) => None,
        }
    }

    /// Chart density of the reference form.
    pub fn sigma0(&self) -> &ScalarField {
        match self {
            Geometry::Torus(g) => g.sigma0(),
            Geometry::Sphere(g) => g.sigma0(),
        }
    }

    /// `λ` with `Ric(ω₀) = λ ω₀` where that holds (sphere), zero on tori.
    pub fn einstein_constant(&self) -> f64 {
        match self {
            Geometry::Torus(_) => 0.0,
            Geometry::Sphere(g) => g.lambda_ke(),
        }
    }

    pub fn mixed_second_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.mixed_second_derivative(f),
            Geometry::Sphere(g) => g.mixed_second_derivative(f),
        }
    }

    /// `Δ₀ f = f_{zz̄} / σ₀`.
    pub fn laplacian0(&self, f: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.mixed_second_derivative(f)?.zip_map(g.sigma0(), |m, s| m / s),
            Geometry::Sphere(g) => g.laplacian0(f),
        }
    }

    /// `Δ₀ log(σ₀ ρ)`, differentiating the reference part together with `ρ`.
    pub fn laplacian0_log_density(&self, rho: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => {
                let ld = rho.zip_map(g.sigma0(), |r, s| (s * r).ln())?;
                g.mixed_second_derivative(&ld)?.zip_map(g.sigma0(), |m, s| m / s)
            }
            Geometry::Sphere(g) => g.laplacian0_log_density(rho),
        }
    }

    /// `tr_{ω₀} Ric(ω₀) = r₀ / σ₀` with `r₀ = −(log σ₀)_{zz̄}`.
    pub fn ric0_trace(&self) -> ScalarField {
        match self {
            Geometry::Torus(g) => g.ric0_trace().clone(),
            Geometry::Sphere(g) => ScalarField::constant(g.shape(), g.lambda_ke()),
        }
    }

    /// `∫ f · weight ω₀`; `None` means unit weight.
    pub fn integrate(&self, f: &ScalarField, weight: Option<&ScalarField>) -> Result<f64> {
        match self {
            Geometry::Torus(g) => g.integrate(f, weight),
            Geometry::Sphere(g) => g.integrate(f, weight),
        }
    }

    /// `∫ f · i dz∧dz̄` in the backend chart.
    pub fn integrate_chart(&self, f: &ScalarField) -> Result<f64> {
        match self {
            Geometry::Torus(g) => g.integrate_chart(f),
            Geometry::Sphere(g) => g.integrate_chart(f),
        }
    }

    pub fn volume(&self) -> f64 {
        self.integrate(&self.constant(1.0), None).expect("shape")
    }

    /// `∫ i ∂u∧∂̄u ≥ 0`.
    pub fn dirichlet_energy(&self, u: &ScalarField) -> Result<f64> {
        match self {
            Geometry::Torus(g) => g.dirichlet_energy(u),
            Geometry::Sphere(g) => g.dirichlet_energy(u),
        }
    }

    /// Pointwise `|∇u|²_{ω₀} = u_z u_z̄ / σ₀`.
    pub fn grad_sq0(&self, u: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.grad_sq0(u),
            Geometry::Sphere(g) => g.grad_sq0(u),
        }
    }

    /// Solution of `Δ₀ u = g` with zero chart mean. `g` must have zero
    /// `ω₀`-integral; any remaining mass is dropped.
    pub fn solve_laplacian0(&self, g: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(t) => t.solve_mixed(&g.zip_map(t.sigma0(), |a, s| a * s)?),
            Geometry::Sphere(s) => s.solve_laplacian0(g),
        }
    }

    /// Constant-coefficient operator treated implicitly by the semi-implicit
    /// scheme: `∂z∂z̄` on the torus, `Δ₀` on the sphere.
    pub fn stiff_operator(&self, f: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.mixed_second_derivative(f),
            Geometry::Sphere(g) => g.laplacian0(f),
        }
    }

    /// Solves `(Id − coef · stiff_operator) u = b`.
    pub fn solve_stiff(&self, b: &ScalarField, coef: f64) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.solve_helmholtz(b, coef),
            Geometry::Sphere(g) => g.solve_helmholtz(b, coef),
        }
    }

    /// Coefficient `c` making `c · stiff_operator` dominate `Δ_φ` for density `rho`.
    pub fn stiff_coefficient(&self, rho: &ScalarField) -> Result<f64> {
        match self {
            Geometry::Torus(g) => Ok(1.0 / rho.zip_map(g.sigma0(), |r, s| r * s)?.min()),
            Geometry::Sphere(_) => Ok(1.0 / rho.min()),
        }
    }

    /// `min (h² σ₀ ρ)` over the grid, `h` the local chart spacing.
    pub fn min_scaled_spacing(&self, rho: &ScalarField) -> Result<f64> {
        match self {
            Geometry::Torus(g) => {
                let h = g.min_spacing();
                Ok(h * h * rho.zip_map(g.sigma0(), |r, s| r * s)?.min())
            }
            Geometry::Sphere(g) => g.min_scaled_spacing(rho),
        }
    }

    /// Projects a field onto the modes the time integrators keep (torus: the
    /// two-thirds band; sphere: identity).
    pub fn dealias(&self, f: &ScalarField) -> Result<ScalarField> {
        match self {
            Geometry::Torus(g) => g.dealias(f),
            Geometry::Sphere(g) => {
                f.check_shape(g.shape())?;
                Ok(f.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn flat_torus_volume_and_integrals() {
        let g = build_torus_geometry(256, 256, 2.0 * PI, &[]).unwrap();
        assert!((g.volume() - 8.0 * PI * PI).abs() < 1e-10);
        let t = g.as_torus().unwrap();
        let c = t.sample(|x, _| x.cos());
        assert!(g.integrate(&c, None).unwrap().abs() < 1e-13);
    }

    #[test]
    fn sphere_volume() {
        let g = build_sphere_geometry(128).unwrap();
        assert!((g.volume() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_energy_of_cosine() {
        let g = build_torus_geometry(64, 64, 2.0 * PI, &[]).unwrap();
        let u = g.as_torus().unwrap().sample(|x, _| 0.5 * x.cos());
        let e = g.dirichlet_energy(&u).unwrap();
        assert!((e - PI * PI / 4.0).abs() < 1e-12, "{e}");
        assert_eq!(g.dirichlet_energy(&g.constant(3.0)).unwrap(), 0.0);
    }

    #[test]
    fn grad_sq_integrates_to_dirichlet_energy() {
        for g in [
            build_torus_geometry(32, 32, 1.0, &[CosineMode::new(1, 1, 0.3)]).unwrap(),
            build_sphere_geometry(64).unwrap(),
        ] {
            let u = match &g {
                Geometry::Torus(t) => t.sample(|x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).cos()),
                Geometry::Sphere(s) => s.sample(|m| m * m * (1.0 - m)),
            };
            let pointwise = g.integrate(&g.grad_sq0(&u).unwrap(), None).unwrap();
            let e = g.dirichlet_energy(&u).unwrap();
            assert!((pointwise - e).abs() < 1e-12 * (1.0 + e), "{pointwise} vs {e}");
        }
    }
}
