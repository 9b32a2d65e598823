//! S¹-invariant data on the round sphere, reduced to the momentum coordinate
//! `μ = |z|²/(1+|z|²) ∈ (0, 1)`.
//!
//! With `σ₀ = 2/(1+|z|²)²` (so that `Ric(ω₀) = ω₀` and the area is 4π):
//!
//! * `Δ₀ f = f_{zz̄}/σ₀ = ½ ∂_μ(μ(1−μ) ∂_μ f)`
//! * `∫ f ω₀ = 4π ∫₀¹ f dμ`
//!
//! The chart used for mixed derivatives is `w = log z`, in which
//! `f_{ww̄} = μ(1−μ) ∂_μ(μ(1−μ) ∂_μ f)` and the reference density is
//! `σ_w = 2μ(1−μ)`. Its real coordinate `s = log|z|` has spacing
//! `dμ / (2μ(1−μ))`.
//!
//! `Δ₀` is discretized in flux form on cell-centred nodes with zero flux
//! through the two pole faces.

use std::f64::consts::PI;

use crate::error::{PcfError, Result};
use crate::field::{GridShape, ScalarField};
use crate::tridiag::solve_tridiagonal;

pub const MIN_NMU: usize = 32;

#[derive(Clone, Debug)]
pub struct SphereGeometry {
    nmu: usize,
    /// Einstein constant of the reference metric.
    lambda_ke: f64,
    /// `∫ f ω₀ = quad_weight · Σ f(μ_i)`.
    quad_weight: f64,
    mu: Vec<f64>,
    /// `μ(1−μ)` at the interior faces `μ = (i+1)/nmu`, `i = 0..nmu-1`.
    face_coef: Vec<f64>,
    sigma0: ScalarField,
}

impl SphereGeometry {
    pub fn new(nmu: usize) -> Result<Self> {
        if nmu < MIN_NMU {
            return Err(PcfError::BadGrid(format!("nmu = {nmu} must be >= {MIN_NMU}")));
        }
        let h = 1.0 / nmu as f64;
        let mu: Vec<f64> = (0..nmu).map(|i| (i as f64 + 0.5) * h).collect();
        let face_coef = (1..nmu)
            .map(|i| {
                let m = i as f64 * h;
                m * (1.0 - m)
            })
            .collect();
        let shape = GridShape::Sphere { nmu };
        let sigma0 = ScalarField::new(shape, mu.iter().map(|m| 2.0 * m * (1.0 - m)).collect())?;
        Ok(Self {
            nmu,
            lambda_ke: 1.0,
            quad_weight: 4.0 * PI / nmu as f64,
            mu,
            face_coef,
            sigma0,
        })
    }

    pub fn nmu(&self) -> usize {
        self.nmu
    }

    pub fn lambda_ke(&self) -> f64 {
        self.lambda_ke
    }

    pub fn quad_weight(&self) -> f64 {
        self.quad_weight
    }

    pub fn shape(&self) -> GridShape {
        GridShape::Sphere { nmu: self.nmu }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Reference density in the `w = log z` chart.
    pub fn sigma0(&self) -> &ScalarField {
        &self.sigma0
    }

    fn h(&self) -> f64 {
        1.0 / self.nmu as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::new(self.shape(), self.mu.iter().map(|&m| f(m)).collect()).expect("sample length")
    }

    /// Interior face fluxes `μ(1−μ) ∂_μ f`.
    fn fluxes(&self, f: &[f64]) -> Vec<f64> {
        let h = self.h();
        self.face_coef
            .iter()
            .enumerate()
            .map(|(i, a)| a * (f[i + 1] - f[i]) / h)
            .collect()
    }

    /// `½ (G_{i+½} − G_{i−½}) / h` with the given pole fluxes.
    fn divergence(&self, interior: &[f64], south: f64, north: f64) -> Vec<f64> {
        let n = self.nmu;
        let scale = 0.5 / self.h();
        (0..n)
            .map(|i| {
                let lo = if i == 0 { south } else { interior[i - 1] };
                let hi = if i + 1 == n { north } else { interior[i] };
                scale * (hi - lo)
            })
            .collect()
    }

    /// `Δ₀ f = ½ ∂_μ(μ(1−μ) ∂_μ f)`.
    pub fn laplacian0(&self, f: &ScalarField) -> Result<ScalarField> {
        f.check_shape(self.shape())?;
        let g = self.fluxes(f.values());
        ScalarField::new(self.shape(), self.divergence(&g, 0.0, 0.0))
    }

    /// `f_{ww̄} = σ_w Δ₀ f = μ(1−μ) ∂_μ(μ(1−μ) ∂_μ f)`.
    pub fn mixed_second_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.laplacian0(f)?.zip_map(&self.sigma0, |l, s| l * s)
    }

    /// `Δ₀ log(σ_w ρ)`, with the reference part carried by its exact face
    /// flux `1 − 2μ` (nonzero at the poles, where `log σ_w` is singular).
    pub fn laplacian0_log_density(&self, rho: &ScalarField) -> Result<ScalarField> {
        rho.check_shape(self.shape())?;
        let log_rho: Vec<f64> = rho.values().iter().map(|r| r.ln()).collect();
        let h = self.h();
        let g: Vec<f64> = self
            .fluxes(&log_rho)
            .iter()
            .enumerate()
            .map(|(i, gr)| gr + (1.0 - 2.0 * (i + 1) as f64 * h))
            .collect();
        ScalarField::new(self.shape(), self.divergence(&g, 1.0, -1.0))
    }

    /// `|∇u|²_{ω₀} = ½ μ(1−μ) u_μ²`, averaged from the two adjacent faces.
    pub fn grad_sq0(&self, u: &ScalarField) -> Result<ScalarField> {
        u.check_shape(self.shape())?;
        let h = self.h();
        let v = u.values();
        let q: Vec<f64> = self
            .face_coef
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let d = (v[i + 1] - v[i]) / h;
                a * d * d
            })
            .collect();
        let n = self.nmu;
        let out = (0..n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { q[i - 1] };
                let hi = if i + 1 == n { 0.0 } else { q[i] };
                0.25 * (lo + hi)
            })
            .collect();
        ScalarField::new(self.shape(), out)
    }

    pub fn integrate(&self, f: &ScalarField, weight: Option<&ScalarField>) -> Result<f64> {
        f.check_shape(self.shape())?;
        let mut acc = 0.0;
        match weight {
            Some(w) => {
                w.check_shape(self.shape())?;
                for (a, b) in f.values().iter().zip(w.values()) {
                    acc += a * b;
                }
            }
            None => {
                for a in f.values() {
                    acc += a;
                }
            }
        }
        Ok(self.quad_weight * acc)
    }

    /// `∫ f · i dw∧dw̄`.
    pub fn integrate_chart(&self, f: &ScalarField) -> Result<f64> {
        f.check_shape(self.shape())?;
        let acc = f
            .values()
            .iter()
            .zip(self.sigma0.values())
            .fold(0.0, |acc, (a, s)| acc + a / s);
        Ok(self.quad_weight * acc)
    }

    /// `∫ i ∂u∧∂̄u = 2π ∫ μ(1−μ) u_μ² dμ`, as a sum over faces.
    pub fn dirichlet_energy(&self, u: &ScalarField) -> Result<f64> {
        u.check_shape(self.shape())?;
        let h = self.h();
        let v = u.values();
        let acc = self
            .face_coef
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, a)| {
                let d = v[i + 1] - v[i];
                acc + a * d * d
            });
        Ok(2.0 * PI * acc / h)
    }

    /// Solves `Δ₀ u = g` by integrating the flux from the south pole, then
    /// removes the chart mean. Any residual total mass of `g` ends up in the
    /// (discarded) north-pole flux.
    pub fn solve_laplacian0(&self, g: &ScalarField) -> Result<ScalarField> {
        g.check_shape(self.shape())?;
        let h = self.h();
        let gv = g.values();
        let mut u = vec![0.0; self.nmu];
        let mut flux = 0.0;
        for i in 0..self.nmu - 1 {
            flux += 2.0 * h * gv[i];
            u[i + 1] = u[i] + flux * h / self.face_coef[i];
        }
        let u = ScalarField::new(self.shape(), u)?;
        let mean = self.integrate_chart(&u)? / self.integrate_chart(&ScalarField::constant(self.shape(), 1.0))?;
        Ok(u.shift(-mean))
    }

    /// Solves `(Id − coef · Δ₀) u = b`.
    pub fn solve_helmholtz(&self, b: &ScalarField, coef: f64) -> Result<ScalarField> {
        b.check_shape(self.shape())?;
        let n = self.nmu;
        let h = self.h();
        let s = coef * 0.5 / (h * h);
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n];
        let mut sup = vec![0.0; n];
        for (i, a) in self.face_coef.iter().enumerate() {
            // face between nodes i and i+1
            diag[i] += s * a;
            diag[i + 1] += s * a;
            sup[i] = -s * a;
            sub[i + 1] = -s * a;
        }
        let x = solve_tridiagonal(&sub, &diag, &sup, b.values())?;
        ScalarField::new(self.shape(), x)
    }

    /// `min_i ρ_i · h_s,i² · σ_w,i` with `h_s = h / (2μ(1−μ))` the spacing of `s = log|z|`.
    pub fn min_scaled_spacing(&self, rho: &ScalarField) -> Result<f64> {
        rho.check_shape(self.shape())?;
        let h = self.h();
        Ok(self
            .mu
            .iter()
            .zip(rho.values())
            .map(|(m, r)| {
                let a = m * (1.0 - m);
                let hs = h / (2.0 * a);
                hs * hs * 2.0 * a * r
            })
            .fold(f64::INFINITY, f64::min))
    }
}
