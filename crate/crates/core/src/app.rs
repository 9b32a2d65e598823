//! Scenario orchestration behind the command-line entry points.

use std::path::{Path, PathBuf};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{make_initial, ScenarioConfig};
use crate::error::{PcfError, Result};
use crate::flow::{drive, initial_state, FlowKind, Trajectory};
use crate::functionals::{estimate_probes, make_record, Probes, TraceRecord};
use crate::geometry::Geometry;
use crate::kahler::{validate_at, MetricState};
use crate::output::{emit_csv, emit_csv_with_divergence};

/// Files written next to the CSV trace, derived from `output.path`.
#[derive(Clone, Debug)]
pub struct OutputPaths {
    stem: PathBuf,
}

impl OutputPaths {
    pub fn new(csv_path: &str) -> Self {
        let p = Path::new(csv_path);
        let stem = if p.extension().is_some_and(|e| e == "csv") {
            p.with_extension("")
        } else {
            p.to_path_buf()
        };
        Self { stem }
    }

    fn with_suffix(&self, suffix: &str) -> PathBuf {
        let mut s = self.stem.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    }

    pub fn csv(&self) -> PathBuf {
        self.with_suffix(".csv")
    }

    pub fn flow_csv(&self, kind: FlowKind) -> PathBuf {
        self.with_suffix(match kind {
            FlowKind::Pcf => "_pcf.csv",
            FlowKind::Nkrf => "_nkrf.csv",
        })
    }

    pub fn checkpoint(&self, step: usize) -> PathBuf {
        self.with_suffix(&format!(".step{step:07}.ckpt"))
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.with_suffix(".final.ckpt")
    }

    pub fn snapshot(&self, step: usize) -> PathBuf {
        self.with_suffix(&format!(".field{step:07}.bin"))
    }

    fn ensure_parent(&self) -> Result<()> {
        if let Some(parent) = self.stem.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        Ok(())
    }
}

/// Outcome of a single-flow scenario.
#[derive(Debug)]
pub struct RunReport {
    pub trajectory: Trajectory,
    pub csv: PathBuf,
    pub final_checkpoint: PathBuf,
}

fn run_with_outputs(geom: &Geometry, start: &MetricState, config: &ScenarioConfig) -> Result<RunReport> {
    let paths = OutputPaths::new(&config.output.path);
    paths.ensure_parent()?;
    let out = &config.output;
    let record_every = config.flow.record_every;
    if out.emit_fields {
        write_checkpoint(&paths.snapshot(0), geom, start.time, &start.phi)?;
    }
    let mut hook = |step: usize, states: &[MetricState]| -> Result<()> {
        let s = &states[0];
        if out.checkpoint_every > 0 && step % out.checkpoint_every == 0 {
            write_checkpoint(&paths.checkpoint(step), geom, s.time, &s.phi)?;
        }
        if out.emit_fields && step % record_every == 0 {
            write_checkpoint(&paths.snapshot(step), geom, s.time, &s.phi)?;
        }
        Ok(())
    };
    let trajectory = drive(geom, start, &[config.flow.flow_kind], &config.flow, &mut hook)?.remove(0);
    let last = trajectory.final_state();
    write_checkpoint(&paths.final_checkpoint(), geom, last.time, &last.phi)?;
    emit_csv(&trajectory, &paths.csv())?;
    Ok(RunReport {
        trajectory,
        csv: paths.csv(),
        final_checkpoint: paths.final_checkpoint(),
    })
}

/// `run`: integrates the configured flow from the configured initial data.
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunReport> {
    let geom = config.geometry.build()?;
    let phi0 = make_initial(&geom, &config.initial)?;
    let start = initial_state(&geom, &phi0, &config.flow)?;
    run_with_outputs(&geom, &start, config)
}

/// `resume`: continues from a checkpoint to `flow.t_end`.
pub fn resume_scenario(checkpoint: &Path, config: &ScenarioConfig) -> Result<RunReport> {
    let geom = config.geometry.build()?;
    let ckpt = read_checkpoint(checkpoint)?;
    let phi = ckpt.field_on(&geom)?;
    if !(ckpt.time < config.flow.t_end) {
        return Err(PcfError::validation(
            "flow.t_end",
            format!("checkpoint time {} is not before t_end {}", ckpt.time, config.flow.t_end),
        ));
    }
    let start = validate_at(&geom, phi, ckpt.time, config.flow.rho_floor)?;
    run_with_outputs(&geom, &start, config)
}

#[derive(Debug)]
pub struct CrossCheckReport {
    pub pcf: Trajectory,
    pub nkrf: Trajectory,
    pub divergence: Vec<f64>,
    pub csv_pcf: PathBuf,
    pub csv_nkrf: PathBuf,
}

impl CrossCheckReport {
    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().copied().fold(0.0, f64::max)
    }
}

/// `crosscheck`: PCF and NKRF in lockstep, compared through `ρ`.
pub fn crosscheck_scenario(config: &ScenarioConfig) -> Result<CrossCheckReport> {
    let geom = config.geometry.build()?;
    let phi0 = make_initial(&geom, &config.initial)?;
    let paths = OutputPaths::new(&config.output.path);
    paths.ensure_parent()?;
    let mut flow = config.flow.clone();
    flow.keep_states = true;
    let cc = crate::flow::crosscheck(&geom, &phi0, &flow)?;
    emit_csv_with_divergence(&cc.pcf, &cc.divergence, &paths.flow_csv(FlowKind::Pcf))?;
    emit_csv_with_divergence(&cc.nkrf, &cc.divergence, &paths.flow_csv(FlowKind::Nkrf))?;
    Ok(CrossCheckReport {
        pcf: cc.pcf,
        nkrf: cc.nkrf,
        divergence: cc.divergence,
        csv_pcf: paths.flow_csv(FlowKind::Pcf),
        csv_nkrf: paths.flow_csv(FlowKind::Nkrf),
    })
}

#[derive(Debug)]
pub struct ProbeReport {
    pub record: TraceRecord,
    pub probes: Probes,
    /// `|∫ P ω_φ| / Vol`
    pub p_mean_defect: f64,
    /// Discrepancy between the two chart expressions of the scalar curvature.
    pub curvature_discrepancy: f64,
}

/// `probe`: every functional and probe on the initial state.
pub fn probe_scenario(config: &ScenarioConfig) -> Result<ProbeReport> {
    let geom = config.geometry.build()?;
    let phi0 = make_initial(&geom, &config.initial)?;
    let state = initial_state(&geom, &phi0, &config.flow)?;
    let (record, p) = make_record(&geom, &state, 0.0, &config.flow.p_list, config.flow.poisson_tol)?;
    let probes = estimate_probes(&geom, &state, &p.field, &config.flow.p_list)?;
    let p_mean_defect = geom.integrate(&p.field, Some(&state.rho))?.abs() / geom.volume();
    let curvature_discrepancy = crate::kahler::scalar_curvature(&geom, &state)?.discrepancy;
    Ok(ProbeReport {
        record,
        probes,
        p_mean_defect,
        curvature_discrepancy,
    })
}

/// Process exit code for each failure class.
pub fn exit_code(e: &PcfError) -> i32 {
    match e {
        PcfError::Parse { .. } => 2,
        PcfError::Validation { .. } | PcfError::BadGrid(_) | PcfError::NonPositiveDensity { .. } => 3,
        PcfError::NotKahler { .. }
        | PcfError::SingularSolve { .. }
        | PcfError::ToleranceNotMet { .. }
        | PcfError::ShapeError { .. } => 4,
        PcfError::Io(_) | PcfError::Checkpoint(_) => 5,
    }
}

/// Interprets `PCFLOW_THREADS`: absent means one thread.
pub fn parse_threads(value: Option<&str>) -> Result<usize> {
    match value {
        None => Ok(1),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(PcfError::validation("PCFLOW_THREADS", format!("`{v}` is not a positive integer"))),
        },
    }
}
