//! Normalized Poisson problems `Δ_φ u = f` on the evolving metric.

use crate::error::{PcfError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;
use crate::kahler::{curvature_primary, laplacian_phi, rbar, trace_ric0, MetricState};

/// Default residual tolerance for Poisson solves.
pub const DEFAULT_POISSON_TOL: f64 = 1e-10;

/// How the additive constant of a Poisson solution is fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// `∫ u ω_φ = 0`
    MeanZeroAgainstOmegaPhi,
    /// `∫ e^u ω_φ = Vol`
    ExpMassEqualsVolume,
}

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: ScalarField,
    /// `max |Δ_φ u − r̃|` against the projected right-hand side.
    pub residual_linf: f64,
    /// `|∫ rhs ω_φ| / Vol` before projection.
    pub compat_defect: f64,
}

/// Projects `rhs` to zero `ω_φ`-mean, solves `Δ_φ u = r̃`, then normalizes.
pub fn solve_poisson_phi(
    geom: &Geometry,
    state: &MetricState,
    rhs: &ScalarField,
    normalization: Normalization,
    tol: f64,
) -> Result<PoissonSolution> {
    let rho = &state.rho;
    let mass = geom.integrate(rho, None)?;
    let rhs_mass = geom.integrate(rhs, Some(rho))?;
    let compat_defect = rhs_mass.abs() / mass;
    let projected = rhs.shift(-rhs_mass / mass);

    if projected.values().iter().all(|&v| v == 0.0) {
        // Δ_φ 0 = 0 holds exactly; skip the solve.
        let field = normalize(geom, state, geom.zeros(), normalization)?;
        return Ok(PoissonSolution {
            field,
            residual_linf: 0.0,
            compat_defect,
        });
    }
    let u = geom.solve_laplacian0(&(&projected * rho))?;
    let residual_linf = laplacian_phi(geom, state, &u)?.max_abs_diff(&projected)?;
    if !(residual_linf <= tol) {
        return Err(PcfError::ToleranceNotMet {
            residual: residual_linf,
            tol,
        });
    }
    let field = normalize(geom, state, u, normalization)?;
    Ok(PoissonSolution {
        field,
        residual_linf,
        compat_defect,
    })
}

fn normalize(geom: &Geometry, state: &MetricState, u: ScalarField, normalization: Normalization) -> Result<ScalarField> {
    let rho = &state.rho;
    let shift = match normalization {
        Normalization::MeanZeroAgainstOmegaPhi => -geom.integrate(&u, Some(rho))? / geom.integrate(rho, None)?,
        Normalization::ExpMassEqualsVolume => {
            let top = u.max();
            let exp = u.map(|v| (v - top).exp());
            let mass = geom.integrate(&exp, Some(rho))?;
            -(top + (mass / geom.volume()).ln())
        }
    };
    Ok(u.shift(shift))
}

/// `Δ_φ P = R̄ − tr_{ω_φ} Ric(ω₀)`, `∫ P ω_φ = 0`.
pub fn solve_p(geom: &Geometry, state: &MetricState, tol: f64) -> Result<PoissonSolution> {
    let rhs = trace_ric0(geom, state)?.map(|t| -t).shift(rbar(geom));
    solve_poisson_phi(geom, state, &rhs, Normalization::MeanZeroAgainstOmegaPhi, tol)
}

/// Ricci potential: `Ric(ω_φ) − λ ω_φ = i∂∂̄h`, `∫ e^h ω_φ = Vol`.
///
/// In trace form this is `Δ_φ h = R(ω_φ) − λ`. On tori `λ = 0`.
pub fn solve_ricci_potential(geom: &Geometry, state: &MetricState, tol: f64) -> Result<PoissonSolution> {
    let rhs = curvature_primary(geom, state)?.shift(-geom.einstein_constant());
    solve_poisson_phi(geom, state, &rhs, Normalization::ExpMassEqualsVolume, tol)
}
