//! Time integration of the pseudo Calabi flow `∂_t φ = F + P` and of the
//! normalized Kähler–Ricci flow `∂_t φ = −h_φ`.

use crate::elliptic::{solve_p, solve_ricci_potential, PoissonSolution, DEFAULT_POISSON_TOL};
use crate::error::{PcfError, Result};
use crate::field::ScalarField;
use crate::functionals::{make_record, TraceRecord, DEFAULT_P_LIST};
use crate::geometry::Geometry;
use crate::kahler::{validate_at, MetricState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    SemiImplicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    /// Pseudo Calabi flow.
    Pcf,
    /// Normalized Kähler–Ricci flow.
    Nkrf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub scheme: Scheme,
    pub flow_kind: FlowKind,
    pub dt_init: f64,
    pub cfl: f64,
    pub t_end: f64,
    /// Positivity floor for accepting a step.
    pub rho_floor: f64,
    pub max_halvings: u32,
    pub poisson_tol: f64,
    /// Steps between trace records.
    pub record_every: usize,
    /// Exponents for the `L^p` probes.
    pub p_list: Vec<f64>,
    /// Keep a copy of the state at every record (otherwise only the final one).
    pub keep_states: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            flow_kind: FlowKind::Pcf,
            dt_init: 1e-2,
            cfl: 0.2,
            t_end: 1.0,
            rho_floor: 0.05,
            max_halvings: 12,
            poisson_tol: DEFAULT_POISSON_TOL,
            record_every: 10,
            p_list: DEFAULT_P_LIST.to_vec(),
            keep_states: true,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_init > 0.0 && self.dt_init.is_finite()) {
            return Err(PcfError::validation("flow.dt_init", "must be > 0"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(PcfError::validation("flow.cfl", "must satisfy 0 < cfl <= 1"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(PcfError::validation("flow.t_end", "must be > 0"));
        }
        if !(self.rho_floor > 0.0 && self.rho_floor < 1.0) {
            return Err(PcfError::validation("flow.rho_floor", "must lie in (0, 1)"));
        }
        if !(self.poisson_tol > 0.0) {
            return Err(PcfError::validation("flow.poisson_tol", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(PcfError::validation("output.record_every", "must be >= 1"));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(1.0..=8.0).contains(*p)) {
            return Err(PcfError::validation("flow.p_list", format!("exponent {p} outside [1, 8]")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ReachedTEnd,
    StepFloorHit,
    NotKahler,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<MetricState>,
    pub records: Vec<TraceRecord>,
    pub config: FlowConfig,
    pub terminated: Termination,
    /// Accepted steps.
    pub steps: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &MetricState {
        self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// `F + P` with `Δ_φ P = R̄ − tr_φ Ric(ω₀)`, `∫ P ω_φ = 0`.
pub fn pcf_rhs(geom: &Geometry, state: &MetricState, tol: f64) -> Result<(ScalarField, PoissonSolution)> {
    let p = solve_p(geom, state, tol)?;
    Ok((&state.big_f + &p.field, p))
}

/// `−h_φ` with `Ric(ω_φ) − λω_φ = i∂∂̄h_φ`, `∫ e^h ω_φ = Vol`.
pub fn nkrf_rhs(geom: &Geometry, state: &MetricState, tol: f64) -> Result<(ScalarField, PoissonSolution)> {
    let h = solve_ricci_potential(geom, state, tol)?;
    Ok((h.field.scale(-1.0), h))
}

pub fn flow_rhs(geom: &Geometry, state: &MetricState, kind: FlowKind, tol: f64) -> Result<(ScalarField, PoissonSolution)> {
    match kind {
        FlowKind::Pcf => pcf_rhs(geom, state, tol),
        FlowKind::Nkrf => nkrf_rhs(geom, state, tol),
    }
}

/// Tolerances used inside a single step.
#[derive(Clone, Copy, Debug)]
pub struct StepLimits {
    pub rho_floor: f64,
    pub poisson_tol: f64,
}

impl From<&FlowConfig> for StepLimits {
    fn from(c: &FlowConfig) -> Self {
        Self {
            rho_floor: c.rho_floor,
            poisson_tol: c.poisson_tol,
        }
    }
}

fn stage_state(geom: &Geometry, phi: ScalarField, time: f64, limits: StepLimits, stage: usize) -> Result<MetricState> {
    validate_at(geom, phi, time, limits.rho_floor).map_err(|e| match e {
        PcfError::NotKahler { min_rho, .. } => PcfError::NotKahler {
            min_rho,
            stage: Some(stage),
        },
        other => other,
    })
}

fn stage_rhs(geom: &Geometry, state: &MetricState, kind: FlowKind, limits: StepLimits) -> Result<ScalarField> {
    let (rhs, _) = flow_rhs(geom, state, kind, limits.poisson_tol)?;
    geom.dealias(&rhs)
}

/// Classical four-stage Runge–Kutta step. Each stage revalidates its
/// potential and re-solves the elliptic problem.
pub fn rk4_step(geom: &Geometry, state: &MetricState, dt: f64, kind: FlowKind, limits: StepLimits) -> Result<MetricState> {
    rk4_step_with(geom, state, dt, limits, |s| {
        let (rhs, _) = flow_rhs(geom, s, kind, limits.poisson_tol)?;
        Ok(rhs)
    })
}

/// [`rk4_step`] with a caller-supplied right-hand side (dealiased here).
pub fn rk4_step_with(
    geom: &Geometry,
    state: &MetricState,
    dt: f64,
    limits: StepLimits,
    rhs: impl Fn(&MetricState) -> Result<ScalarField>,
) -> Result<MetricState> {
    let eval = |s: &MetricState| geom.dealias(&rhs(s)?);
    let t = state.time;
    let phi = &state.phi;
    let k1 = eval(state)?;
    let s2 = stage_state(geom, phi.axpy(0.5 * dt, &k1)?, t + 0.5 * dt, limits, 2)?;
    let k2 = eval(&s2)?;
    let s3 = stage_state(geom, phi.axpy(0.5 * dt, &k2)?, t + 0.5 * dt, limits, 3)?;
    let k3 = eval(&s3)?;
    let s4 = stage_state(geom, phi.axpy(dt, &k3)?, t + dt, limits, 4)?;
    let k4 = eval(&s4)?;

    let mut next = phi.clone();
    for (i, v) in next.values_mut().iter_mut().enumerate() {
        *v += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    stage_state(geom, next, t + dt, limits, 5)
}

/// First-order IMEX step: the constant-coefficient part `c · S` of the
/// linearization is implicit, the remainder explicit, with
/// `c = 1 / min(σ₀ρ)` (`1 / min ρ` on the sphere, where `S = Δ₀`).
pub fn semi_implicit_step(
    geom: &Geometry,
    state: &MetricState,
    dt: f64,
    kind: FlowKind,
    limits: StepLimits,
) -> Result<MetricState> {
    let rhs = stage_rhs(geom, state, kind, limits)?;
    let c = geom.stiff_coefficient(&state.rho)?;
    let s_phi = geom.stiff_operator(&state.phi)?;
    let mut b = state.phi.clone();
    for (i, v) in b.values_mut().iter_mut().enumerate() {
        *v += dt * (rhs[i] - c * s_phi[i]);
    }
    let next = geom.solve_stiff(&b, dt * c)?;
    stage_state(geom, next, state.time + dt, limits, 1)
}

/// Heat-equation step limit `cfl · 4 · min(h² σ₀ ρ)`.
pub fn suggest_dt(geom: &Geometry, state: &MetricState, cfl: f64) -> Result<f64> {
    Ok(cfl * 4.0 * geom.min_scaled_spacing(&state.rho)?)
}

fn advance(geom: &Geometry, state: &MetricState, dt: f64, kind: FlowKind, cfg: &FlowConfig) -> Result<MetricState> {
    let limits = StepLimits::from(cfg);
    match cfg.scheme {
        Scheme::Rk4 => rk4_step(geom, state, dt, kind, limits),
        Scheme::SemiImplicit => semi_implicit_step(geom, state, dt, kind, limits),
    }
}

fn is_step_failure(e: &PcfError) -> bool {
    matches!(
        e,
        PcfError::NotKahler { .. } | PcfError::ToleranceNotMet { .. } | PcfError::SingularSolve { .. }
    )
}

/// Called after every accepted step with the step count and current states.
pub type StepHook<'a> = dyn FnMut(usize, &[MetricState]) -> Result<()> + 'a;

/// Advances one or more flows from common initial data with a shared step
/// sequence.
///
/// The step size is `min(dt_init, suggest_dt)` over all flows for RK4 and
/// `dt_init` for the semi-implicit scheme, clipped to land on `t_end`.
/// A failed step is retried with halved `dt` up to `max_halvings` times.
pub fn drive(
    geom: &Geometry,
    start: &MetricState,
    kinds: &[FlowKind],
    cfg: &FlowConfig,
    hook: &mut StepHook<'_>,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let mut current: Vec<MetricState> = kinds.iter().map(|_| start.clone()).collect();
    let mut trajectories: Vec<Trajectory> = kinds
        .iter()
        .map(|&k| Trajectory {
            states: Vec::new(),
            records: Vec::new(),
            config: FlowConfig {
                flow_kind: k,
                ..cfg.clone()
            },
            terminated: Termination::ReachedTEnd,
            steps: 0,
        })
        .collect();
    for (traj, s) in trajectories.iter_mut().zip(&current) {
        push_record(geom, traj, s, 0.0, cfg)?;
    }

    let t_end = cfg.t_end;
    let mut steps = 0usize;
    let mut terminated = Termination::ReachedTEnd;
    let mut last_recorded = 0usize;
    let mut last_dt = 0.0;
    while current[0].time < t_end {
        let mut dt = match cfg.scheme {
            Scheme::Rk4 => {
                let mut dt = cfg.dt_init;
                for s in &current {
                    dt = dt.min(suggest_dt(geom, s, cfg.cfl)?);
                }
                dt
            }
            Scheme::SemiImplicit => cfg.dt_init,
        };
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let remaining = t_end - current[0].time;
            let lands = dt >= remaining - 1e-9 * dt;
            let step_dt = if lands { remaining } else { dt };
            match try_all(geom, &current, kinds, step_dt, cfg) {
                Ok(mut next) => {
                    if lands {
                        for s in &mut next {
                            s.time = t_end;
                        }
                    }
                    accepted = Some((next, step_dt));
                    break;
                }
                Err(e) if is_step_failure(&e) => dt *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((next, step_dt)) = accepted else {
            terminated = Termination::StepFloorHit;
            break;
        };
        current = next;
        steps += 1;
        last_dt = step_dt;
        hook(steps, &current)?;
        if steps % cfg.record_every == 0 || current[0].time >= t_end {
            for (traj, s) in trajectories.iter_mut().zip(&current) {
                push_record(geom, traj, s, step_dt, cfg)?;
            }
            last_recorded = steps;
        }
    }
    if last_recorded != steps {
        for (traj, s) in trajectories.iter_mut().zip(&current) {
            push_record(geom, traj, s, last_dt, cfg)?;
        }
    }
    for (traj, s) in trajectories.iter_mut().zip(current) {
        traj.terminated = terminated;
        traj.steps = steps;
        if !cfg.keep_states {
            traj.states.clear();
            traj.states.push(s);
        }
    }
    Ok(trajectories)
}

fn try_all(geom: &Geometry, current: &[MetricState], kinds: &[FlowKind], dt: f64, cfg: &FlowConfig) -> Result<Vec<MetricState>> {
    current
        .iter()
        .zip(kinds)
        .map(|(s, &k)| advance(geom, s, dt, k, cfg))
        .collect()
}

fn push_record(geom: &Geometry, traj: &mut Trajectory, state: &MetricState, dt: f64, cfg: &FlowConfig) -> Result<()> {
    let (record, _) = make_record(geom, state, dt, &cfg.p_list, cfg.poisson_tol)?;
    traj.records.push(record);
    if cfg.keep_states || traj.states.is_empty() {
        traj.states.push(state.clone());
    }
    Ok(())
}

/// Validates `phi0` at the flow's positivity floor.
pub fn initial_state(geom: &Geometry, phi0: &ScalarField, cfg: &FlowConfig) -> Result<MetricState> {
    validate_at(geom, phi0.clone(), 0.0, cfg.rho_floor)
}

/// Runs `cfg.flow_kind` from `phi0` to `cfg.t_end`.
pub fn run(geom: &Geometry, phi0: &ScalarField, cfg: &FlowConfig) -> Result<Trajectory> {
    let start = initial_state(geom, phi0, cfg)?;
    run_from(geom, &start, cfg, &mut |_, _| Ok(()))
}

/// Continues a flow from an arbitrary state (e.g. a checkpoint).
pub fn run_from(geom: &Geometry, start: &MetricState, cfg: &FlowConfig, hook: &mut StepHook<'_>) -> Result<Trajectory> {
    let mut out = drive(geom, start, &[cfg.flow_kind], cfg, hook)?;
    Ok(out.remove(0))
}

/// Paired PCF / NKRF trajectories with the per-record density divergence.
#[derive(Clone, Debug)]
pub struct CrossCheck {
    pub pcf: Trajectory,
    pub nkrf: Trajectory,
    /// `sup |ρ_PCF − ρ_NKRF|` at each record.
    pub divergence: Vec<f64>,
}

impl CrossCheck {
    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs both flows from the same data with an identical step sequence.
pub fn crosscheck(geom: &Geometry, phi0: &ScalarField, cfg: &FlowConfig) -> Result<CrossCheck> {
    let start = initial_state(geom, phi0, cfg)?;
    let mut divergence = Vec::new();
    let cfg = FlowConfig {
        keep_states: true,
        ..cfg.clone()
    };
    let mut out = drive(geom, &start, &[FlowKind::Pcf, FlowKind::Nkrf], &cfg, &mut |_, _| Ok(()))?;
    let nkrf = out.pop().expect("two flows");
    let pcf = out.pop().expect("two flows");
    for (a, b) in pcf.states.iter().zip(&nkrf.states) {
        divergence.push(a.rho.max_abs_diff(&b.rho)?);
    }
    Ok(CrossCheck { pcf, nkrf, divergence })
}
