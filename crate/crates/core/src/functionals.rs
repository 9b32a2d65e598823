//! Energy functionals and monitored norms along a flow.
//!
//! All integrals are against `ω_φ = ρ ω₀` unless noted. In complex dimension
//! one `tr_φ χ = χ / (σ₀ ρ)` and `tr_φ ω₀ = 1/ρ`.

use crate::elliptic::{solve_p, PoissonSolution};
use crate::error::{PcfError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;
use crate::kahler::{curvature_primary, rbar, MetricState, DEFAULT_RHO_FLOOR};

pub const DEFAULT_QUAD_POINTS: usize = 16;
pub const DEFAULT_P_LIST: [f64; 3] = [1.0, 2.0, 4.0];

/// A closed (1,1)-form `χ = i · density · dz∧dz̄` with its average `χ̄ = ∫χ / Vol`.
#[derive(Clone, Debug)]
pub struct ClosedForm11 {
    pub density: ScalarField,
    pub mean: f64,
}

impl ClosedForm11 {
    pub fn new(geom: &Geometry, density: ScalarField) -> Result<Self> {
        let mean = geom.integrate_chart(&density)? / geom.volume();
        Ok(Self { density, mean })
    }

    /// `χ = 0`.
    pub fn zero(geom: &Geometry) -> Self {
        Self {
            density: geom.zeros(),
            mean: 0.0,
        }
    }

    /// `χ = ω₀`, `χ̄ = 1`.
    pub fn reference(geom: &Geometry) -> Self {
        Self {
            density: geom.sigma0().clone(),
            mean: 1.0,
        }
    }

    /// `χ = −Ric(ω₀)`, `χ̄ = −R̄`.
    pub fn neg_ricci(geom: &Geometry) -> Self {
        let density = (&geom.ric0_trace() * geom.sigma0()).scale(-1.0);
        Self {
            density,
            mean: -rbar(geom),
        }
    }

    /// `tr_φ χ − χ̄` for the metric with volume ratio `rho`.
    pub fn trace_deviation(&self, geom: &Geometry, rho: &ScalarField) -> Result<ScalarField> {
        let chi_rel = self.density.zip_map(geom.sigma0(), |c, s| c / s)?;
        chi_rel.zip_map(rho, |c, r| c / r - self.mean)
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `∫ F ω_φ`.
pub fn entropy(geom: &Geometry, state: &MetricState) -> Result<f64> {
    geom.integrate(&state.big_f, Some(&state.rho))
}

/// `J_χ(φ) = ∫₀¹ ∫ φ (tr_{tφ} χ − χ̄) ω_{tφ} dt` by Gauss–Legendre quadrature in `t`.
pub fn j_chi_path(geom: &Geometry, chi: &ClosedForm11, phi: &ScalarField, quad_points: usize) -> Result<f64> {
    let lap = geom.laplacian0(phi)?;
    let chi_rel = chi.density.zip_map(geom.sigma0(), |c, s| c / s)?;
    let (nodes, weights) = gauss_legendre_unit(quad_points);
    let mut integrand = geom.zeros();
    let mut total = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let mut min_rho = f64::INFINITY;
        for (((out, &l), &c), &f) in integrand
            .values_mut()
            .iter_mut()
            .zip(lap.values())
            .zip(chi_rel.values())
            .zip(phi.values())
        {
            let rho_t = 1.0 + t * l;
            min_rho = min_rho.min(rho_t);
            *out = f * (c / rho_t - chi.mean) * rho_t;
        }
        if !(min_rho > DEFAULT_RHO_FLOOR) {
            return Err(PcfError::NotKahler { min_rho, stage: None });
        }
        total += w * geom.integrate(&integrand, None)?;
    }
    Ok(total)
}

/// `½ ∫ i∂φ∧∂̄φ`, the closed-form expression in complex dimension one.
pub fn j_chi_closed_form(geom: &Geometry, _chi: &ClosedForm11, phi: &ScalarField) -> Result<f64> {
    Ok(0.5 * geom.dirichlet_energy(phi)?)
}

/// `K(φ) = ∫ F ω_φ + J_{−Ric(ω₀)}(φ)`.
pub fn k_energy(geom: &Geometry, state: &MetricState) -> Result<f64> {
    Ok(entropy(geom, state)? + j_neg_ric(geom, state)?)
}

fn j_neg_ric(geom: &Geometry, state: &MetricState) -> Result<f64> {
    j_chi_path(geom, &ClosedForm11::neg_ricci(geom), &state.phi, DEFAULT_QUAD_POINTS)
}

/// `∫ |∇_φ(F + P)|² ω_φ = ∫ i∂(F+P)∧∂̄(F+P)`.
pub fn dissipation(geom: &Geometry, state: &MetricState, p: &ScalarField) -> Result<f64> {
    geom.dirichlet_energy(&(&state.big_f + p))
}

/// `I(φ) = ½ ∫ φ (ρ + 1) ω₀`.
pub fn i_functional(geom: &Geometry, state: &MetricState) -> Result<f64> {
    let w = state.rho.shift(1.0);
    Ok(0.5 * geom.integrate(&state.phi, Some(&w))?)
}

/// `∫ (R − R̄)² ω_φ`.
pub fn calabi_energy(geom: &Geometry, state: &MetricState) -> Result<f64> {
    let rb = rbar(geom);
    let dev = curvature_primary(geom, state)?.map(|r| (r - rb) * (r - rb));
    geom.integrate(&dev, Some(&state.rho))
}

/// `L^p`-type integrals monitored by the smoothing estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct Probes {
    /// `(p, ∫ |∇_φF|^{2p} ω_φ)`
    pub grad_f: Vec<(f64, f64)>,
    /// `(p, ∫ (tr_φ ω₀)^{p+1} ω_φ)`
    pub trace0: Vec<(f64, f64)>,
    /// `(p, ∫ |∇_φP|^{2p} ω_φ)`
    pub grad_p: Vec<(f64, f64)>,
}

pub fn estimate_probes(geom: &Geometry, state: &MetricState, p_field: &ScalarField, p_list: &[f64]) -> Result<Probes> {
    if let Some(p) = p_list.iter().find(|p| !(1.0..=8.0).contains(*p)) {
        return Err(PcfError::validation("p_list", format!("exponent {p} outside [1, 8]")));
    }
    let rho = &state.rho;
    let grad_f = geom.grad_sq0(&state.big_f)?.zip_map(rho, |g, r| g / r)?;
    let grad_p = geom.grad_sq0(p_field)?.zip_map(rho, |g, r| g / r)?;
    let mut out = Probes {
        grad_f: Vec::with_capacity(p_list.len()),
        trace0: Vec::with_capacity(p_list.len()),
        grad_p: Vec::with_capacity(p_list.len()),
    };
    for &p in p_list {
        out.grad_f.push((p, geom.integrate(&grad_f.map(|g| pow(g, p)), Some(rho))?));
        out.trace0.push((p, geom.integrate(&rho.map(|r| pow(r.recip(), p + 1.0)), Some(rho))?));
        out.grad_p.push((p, geom.integrate(&grad_p.map(|g| pow(g, p)), Some(rho))?));
    }
    Ok(out)
}

/// `x^p`, taking the integer-power path when `p` is a whole number.
fn pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// One time sample of every monitored quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub time: f64,
    pub dt: f64,
    pub sup_f: f64,
    pub inf_f: f64,
    /// `‖P‖₀`
    pub sup_p: f64,
    pub entropy: f64,
    pub j_neg_ric: f64,
    pub k_energy: f64,
    pub i_functional: f64,
    pub dissipation: f64,
    pub calabi_energy: f64,
    pub rho_min: f64,
    pub volume: f64,
    pub poisson_residual: f64,
    pub lp_grad_f: Vec<(f64, f64)>,
    pub lp_trace0: Vec<(f64, f64)>,
}

impl TraceRecord {
    /// `‖F‖₀`
    pub fn norm_f(&self) -> f64 {
        self.sup_f.abs().max(self.inf_f.abs())
    }

    /// Looks up `∫ |∇_φF|^{2p} ω_φ` for exponent `p`.
    pub fn grad_f_lp(&self, p: f64) -> Option<f64> {
        self.lp_grad_f.iter().find(|(q, _)| *q == p).map(|(_, v)| *v)
    }
}

/// Evaluates every functional on `state`, solving for `P` along the way.
pub fn make_record(
    geom: &Geometry,
    state: &MetricState,
    dt: f64,
    p_list: &[f64],
    poisson_tol: f64,
) -> Result<(TraceRecord, PoissonSolution)> {
    let p = solve_p(geom, state, poisson_tol)?;
    let entropy = entropy(geom, state)?;
    let j_neg_ric = j_neg_ric(geom, state)?;
    let probes = estimate_probes(geom, state, &p.field, p_list)?;
    let record = TraceRecord {
        time: state.time,
        dt,
        sup_f: state.big_f.max(),
        inf_f: state.big_f.min(),
        sup_p: p.field.sup_abs(),
        entropy,
        j_neg_ric,
        k_energy: entropy + j_neg_ric,
        i_functional: i_functional(geom, state)?,
        dissipation: dissipation(geom, state, &p.field)?,
        calabi_energy: calabi_energy(geom, state)?,
        rho_min: state.rho.min(),
        volume: geom.integrate(&state.rho, None)?,
        poisson_residual: p.residual_linf,
        lp_grad_f: probes.grad_f,
        lp_trace0: probes.trace0,
    };
    Ok((record, p))
}
