//! Pointwise Kähler quantities of `ω_φ = ω₀ + i∂∂̄φ` in complex dimension one.

use crate::error::{PcfError, Result};
use crate::field::ScalarField;
use crate::geometry::Geometry;

/// Default positivity floor for [`validate_kahler`].
pub const DEFAULT_RHO_FLOOR: f64 = 1e-6;

/// A potential together with its cached volume ratio and its logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricState {
    pub phi: ScalarField,
    /// `ρ = ω_φ / ω₀`
    pub rho: ScalarField,
    /// `F = log ρ`
    pub big_f: ScalarField,
    pub time: f64,
}

/// `ρ_φ = 1 + Δ₀ φ`.
pub fn ma_density(geom: &Geometry, phi: &ScalarField) -> Result<ScalarField> {
    Ok(geom.laplacian0(phi)?.shift(1.0))
}

/// Builds a [`MetricState`] at time zero, failing if `min ρ ≤ rho_floor`.
pub fn validate_kahler(geom: &Geometry, phi: &ScalarField, rho_floor: f64) -> Result<MetricState> {
    validate_at(geom, phi.clone(), 0.0, rho_floor)
}

pub(crate) fn validate_at(geom: &Geometry, phi: ScalarField, time: f64, rho_floor: f64) -> Result<MetricState> {
    if !phi.is_finite() {
        return Err(PcfError::NotKahler {
            min_rho: f64::NAN,
            stage: None,
        });
    }
    let rho = ma_density(geom, &phi)?;
    let min_rho = rho.min();
    if !(min_rho > rho_floor) {
        return Err(PcfError::NotKahler { min_rho, stage: None });
    }
    let big_f = rho.map(f64::ln);
    Ok(MetricState { phi, rho, big_f, time })
}

/// `Δ_φ f = f_{zz̄} / (σ₀ ρ)`.
pub fn laplacian_phi(geom: &Geometry, state: &MetricState, f: &ScalarField) -> Result<ScalarField> {
    geom.laplacian0(f)?.zip_map(&state.rho, |l, r| l / r)
}

/// `tr_{ω_φ} Ric(ω₀) = r₀ / (σ₀ ρ)`.
pub fn trace_ric0(geom: &Geometry, state: &MetricState) -> Result<ScalarField> {
    geom.ric0_trace().zip_map(&state.rho, |t, r| t / r)
}

/// Scalar curvature with the discrepancy between its two chart expressions.
#[derive(Clone, Debug)]
pub struct ScalarCurvature {
    /// `−Δ_φ F + tr_{ω_φ} Ric(ω₀)`
    pub field: ScalarField,
    /// `max |field − (−(log σ₀ρ)_{zz̄} / (σ₀ρ))|`
    pub discrepancy: f64,
}

pub fn scalar_curvature(geom: &Geometry, state: &MetricState) -> Result<ScalarCurvature> {
    let field = curvature_primary(geom, state)?;
    let direct = geom
        .laplacian0_log_density(&state.rho)?
        .zip_map(&state.rho, |l, r| -l / r)?;
    let discrepancy = field.max_abs_diff(&direct)?;
    Ok(ScalarCurvature { field, discrepancy })
}

pub(crate) fn curvature_primary(geom: &Geometry, state: &MetricState) -> Result<ScalarField> {
    let lap_f = laplacian_phi(geom, state, &state.big_f)?;
    let tr = trace_ric0(geom, state)?;
    tr.axpy(-1.0, &lap_f)
}

/// Average scalar curvature of the class, `∫R(ω₀)ω₀ / ∫ω₀`.
pub fn rbar(geom: &Geometry) -> f64 {
    let r0 = geom.ric0_trace();
    geom.integrate(&r0, None).expect("shape") / geom.volume()
}
