//! Scenario files: a line-oriented `section.key = value` format.
//!
//! ```text
//! # flat torus relaxation
//! geometry.kind = torus
//! geometry.nx = 256
//! initial.kind = cosines
//! initial.cosines = 1, 0, 0.5
//! flow.t_end = 2
//! ```
//!
//! Lists use `,` between numbers and `;` between tuples. Unknown keys,
//! duplicate keys and malformed values are errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PcfError, Result};
use crate::field::ScalarField;
use crate::flow::{FlowConfig, FlowKind, Scheme};
use crate::geometry::{build_sphere_geometry, build_torus_geometry, CosineMode, Geometry};

#[derive(Clone, Debug, PartialEq)]
pub enum GeometrySpec {
    Torus {
        nx: usize,
        ny: usize,
        length: f64,
        sigma0_modes: Vec<CosineMode>,
    },
    Sphere {
        nmu: usize,
    },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry> {
        match self {
            GeometrySpec::Torus {
                nx,
                ny,
                length,
                sigma0_modes,
            } => build_torus_geometry(*nx, *ny, *length, sigma0_modes),
            GeometrySpec::Sphere { nmu } => build_sphere_geometry(*nmu),
        }
    }
}

/// Band-limited random potential rescaled to a prescribed `sup |F|`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomSmooth {
    pub seed: u64,
    /// Highest mode index drawn.
    pub modes: usize,
    /// Amplitudes scale like `|k|^{-decay}`.
    pub decay: f64,
    pub target_sup_f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Zero,
    /// Torus only: `φ = Σ a cos(2π(kx x + ky y)/L)`.
    Cosines(Vec<CosineMode>),
    /// Sphere only: `φ = Σ c_i μ^i`.
    Polynomial(Vec<f64>),
    RandomSmooth(RandomSmooth),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    /// CSV path; snapshots and checkpoints are written next to it.
    pub path: String,
    pub emit_fields: bool,
    /// Steps between checkpoints (0 disables periodic checkpoints).
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub geometry: GeometrySpec,
    pub initial: InitialSpec,
    /// `record_every` lives under `output.` in the file.
    pub flow: FlowConfig,
    pub output: OutputSpec,
}

const KEYS: &[&str] = &[
    "geometry.kind",
    "geometry.nx",
    "geometry.ny",
    "geometry.length",
    "geometry.sigma0_modes",
    "geometry.nmu",
    "initial.kind",
    "initial.cosines",
    "initial.coefficients",
    "initial.seed",
    "initial.modes",
    "initial.decay",
    "initial.target_sup_f",
    "flow.scheme",
    "flow.kind",
    "flow.dt_init",
    "flow.cfl",
    "flow.t_end",
    "flow.rho_floor",
    "flow.max_halvings",
    "flow.poisson_tol",
    "flow.p_list",
    "output.path",
    "output.record_every",
    "output.emit_fields",
    "output.checkpoint_every",
];

struct Entry {
    line: usize,
    value: String,
}

struct Table {
    entries: BTreeMap<String, Entry>,
}

impl Table {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn parse_with<T>(&mut self, key: &str, f: impl Fn(&str) -> Option<T>, what: &str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).ok_or_else(|| PcfError::Parse {
                line: e.line,
                message: format!("`{key}`: expected {what}, got `{}`", e.value),
            }),
        }
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        self.parse_with(key, |s| s.parse::<f64>().ok(), "a number")
    }

    fn uint(&mut self, key: &str) -> Result<Option<usize>> {
        self.parse_with(key, |s| s.parse::<usize>().ok(), "a non-negative integer")
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        self.parse_with(key, |s| s.parse::<u64>().ok(), "a non-negative integer")
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        self.parse_with(key, |s| s.parse::<bool>().ok(), "true or false")
    }

    fn floats(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(key, parse_floats, "a comma-separated list of numbers")
    }

    fn triples(&mut self, key: &str) -> Result<Option<Vec<CosineMode>>> {
        self.parse_with(key, parse_triples, "`kx, ky, amplitude` triples separated by `;`")
    }

    fn word(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|e| e.value)
    }

    /// Rejects keys that are meaningful only for another variant.
    fn forbid(&mut self, keys: &[&str], context: &str) -> Result<()> {
        for k in keys {
            if self.entries.contains_key(*k) {
                return Err(PcfError::validation(k, format!("not used with {context}")));
            }
        }
        Ok(())
    }
}

fn parse_floats(s: &str) -> Option<Vec<f64>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().ok()).collect()
}

fn parse_triples(s: &str) -> Option<Vec<CosineMode>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(';')
        .map(|t| {
            let parts: Vec<&str> = t.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return None;
            }
            Some(CosineMode::new(
                parts[0].parse().ok()?,
                parts[1].parse().ok()?,
                parts[2].parse().ok()?,
            ))
        })
        .collect()
}

fn tokenize(text: &str) -> Result<Table> {
    let mut entries = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(PcfError::Parse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || key.split('.').count() != 2 || key.split('.').any(str::is_empty) {
            return Err(PcfError::Parse {
                line,
                message: format!("malformed key `{key}` (expected `section.name`)"),
            });
        }
        if !KEYS.contains(&key) {
            return Err(PcfError::validation(key, "unknown key"));
        }
        let previous = entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
        if previous.is_some() {
            return Err(PcfError::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(Table { entries })
}

/// Parses and validates a scenario, filling defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut t = tokenize(text)?;

    let geometry = match t.word("geometry.kind").as_deref() {
        Some("torus") => {
            t.forbid(&["geometry.nmu"], "geometry.kind = torus")?;
            let nx = t.uint("geometry.nx")?.unwrap_or(256);
            GeometrySpec::Torus {
                nx,
                ny: t.uint("geometry.ny")?.unwrap_or(nx),
                length: t.float("geometry.length")?.unwrap_or(2.0 * PI),
                sigma0_modes: t.triples("geometry.sigma0_modes")?.unwrap_or_default(),
            }
        }
        Some("sphere") => {
            t.forbid(
                &["geometry.nx", "geometry.ny", "geometry.length", "geometry.sigma0_modes"],
                "geometry.kind = sphere",
            )?;
            GeometrySpec::Sphere {
                nmu: t.uint("geometry.nmu")?.unwrap_or(512),
            }
        }
        Some(other) => {
            return Err(PcfError::validation(
                "geometry.kind",
                format!("`{other}` is not one of torus, sphere"),
            ))
        }
        None => return Err(PcfError::validation("geometry.kind", "required")),
    };

    let random_keys = ["initial.seed", "initial.modes", "initial.decay", "initial.target_sup_f"];
    let initial = match t.word("initial.kind").as_deref().unwrap_or("zero") {
        "zero" => {
            t.forbid(&random_keys, "initial.kind = zero")?;
            t.forbid(&["initial.cosines", "initial.coefficients"], "initial.kind = zero")?;
            InitialSpec::Zero
        }
        "cosines" => {
            t.forbid(&random_keys, "initial.kind = cosines")?;
            t.forbid(&["initial.coefficients"], "initial.kind = cosines")?;
            let modes = t
                .triples("initial.cosines")?
                .ok_or_else(|| PcfError::validation("initial.cosines", "required for initial.kind = cosines"))?;
            InitialSpec::Cosines(modes)
        }
        "polynomial" => {
            t.forbid(&random_keys, "initial.kind = polynomial")?;
            t.forbid(&["initial.cosines"], "initial.kind = polynomial")?;
            let c = t.floats("initial.coefficients")?.ok_or_else(|| {
                PcfError::validation("initial.coefficients", "required for initial.kind = polynomial")
            })?;
            InitialSpec::Polynomial(c)
        }
        "random_smooth" => {
            t.forbid(&["initial.cosines", "initial.coefficients"], "initial.kind = random_smooth")?;
            InitialSpec::RandomSmooth(RandomSmooth {
                seed: t.u64("initial.seed")?.unwrap_or(1),
                modes: t.uint("initial.modes")?.unwrap_or(8),
                decay: t.float("initial.decay")?.unwrap_or(1.5),
                target_sup_f: t.float("initial.target_sup_f")?.unwrap_or(0.05),
            })
        }
        other => {
            return Err(PcfError::validation(
                "initial.kind",
                format!("`{other}` is not one of zero, cosines, polynomial, random_smooth"),
            ))
        }
    };

    let defaults = FlowConfig::default();
    let scheme = match t.word("flow.scheme").as_deref() {
        None | Some("rk4") => Scheme::Rk4,
        Some("semi_implicit") => Scheme::SemiImplicit,
        Some(other) => {
            return Err(PcfError::validation(
                "flow.scheme",
                format!("`{other}` is not one of rk4, semi_implicit"),
            ))
        }
    };
    let flow_kind = match t.word("flow.kind").as_deref() {
        None | Some("pcf") => FlowKind::Pcf,
        Some("nkrf") => FlowKind::Nkrf,
        Some(other) => {
            return Err(PcfError::validation("flow.kind", format!("`{other}` is not one of pcf, nkrf")))
        }
    };
    let max_halvings = t.uint("flow.max_halvings")?.unwrap_or(defaults.max_halvings as usize);
    let flow = FlowConfig {
        scheme,
        flow_kind,
        dt_init: t.float("flow.dt_init")?.unwrap_or(defaults.dt_init),
        cfl: t.float("flow.cfl")?.unwrap_or(defaults.cfl),
        t_end: t.float("flow.t_end")?.unwrap_or(defaults.t_end),
        rho_floor: t.float("flow.rho_floor")?.unwrap_or(defaults.rho_floor),
        max_halvings: u32::try_from(max_halvings)
            .map_err(|_| PcfError::validation("flow.max_halvings", "too large"))?,
        poisson_tol: t.float("flow.poisson_tol")?.unwrap_or(defaults.poisson_tol),
        record_every: t.uint("output.record_every")?.unwrap_or(defaults.record_every),
        p_list: t.floats("flow.p_list")?.unwrap_or(defaults.p_list),
        keep_states: false,
    };
    let output = OutputSpec {
        path: t.word("output.path").unwrap_or_else(|| "trace.csv".to_string()),
        emit_fields: t.boolean("output.emit_fields")?.unwrap_or(false),
        checkpoint_every: t.uint("output.checkpoint_every")?.unwrap_or(0),
    };
    debug_assert!(t.entries.is_empty(), "every known key is consumed");

    let config = ScenarioConfig {
        geometry,
        initial,
        flow,
        output,
    };
    config.validate()?;
    Ok(config)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        match (&self.geometry, &self.initial) {
            (GeometrySpec::Torus { .. }, InitialSpec::Polynomial(_)) => {
                return Err(PcfError::validation("initial.kind", "polynomial initial data needs a sphere"))
            }
            (GeometrySpec::Sphere { .. }, InitialSpec::Cosines(_)) => {
                return Err(PcfError::validation("initial.kind", "cosine initial data needs a torus"))
            }
            _ => {}
        }
        match &self.geometry {
            GeometrySpec::Torus { nx, ny, length, .. } => {
                for (key, n) in [("geometry.nx", *nx), ("geometry.ny", *ny)] {
                    if n < 16 || !n.is_power_of_two() {
                        return Err(PcfError::validation(key, "must be a power of two >= 16"));
                    }
                }
                if !(*length > 0.0 && length.is_finite()) {
                    return Err(PcfError::validation("geometry.length", "must be > 0"));
                }
            }
            GeometrySpec::Sphere { nmu } => {
                if *nmu < crate::geometry::MIN_NMU {
                    return Err(PcfError::validation(
                        "geometry.nmu",
                        format!("must be >= {}", crate::geometry::MIN_NMU),
                    ));
                }
            }
        }
        if let InitialSpec::RandomSmooth(r) = &self.initial {
            if !(r.target_sup_f > 0.0 && r.target_sup_f <= 1.0) {
                return Err(PcfError::validation("initial.target_sup_f", "must lie in (0, 1]"));
            }
            if !(r.decay >= 0.0 && r.decay.is_finite()) {
                return Err(PcfError::validation("initial.decay", "must be >= 0"));
            }
            let limit = match &self.geometry {
                GeometrySpec::Torus { nx, ny, .. } => (*nx.min(ny) - 1) / 3,
                GeometrySpec::Sphere { nmu } => nmu / 4,
            };
            if r.modes == 0 || r.modes > limit {
                return Err(PcfError::validation(
                    "initial.modes",
                    format!("must lie in [1, {limit}] for this grid"),
                ));
            }
        }
        if self.output.path.is_empty() {
            return Err(PcfError::validation("output.path", "must not be empty"));
        }
        Ok(())
    }
}

fn fmt_triples(modes: &[CosineMode]) -> String {
    modes
        .iter()
        .map(|m| format!("{}, {}, {:?}", m.kx, m.ky, m.amplitude))
        .collect::<Vec<_>>()
        .join("; ")
}

fn fmt_floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

/// Renders every effective setting; the output parses back to an equal config.
pub fn print_config(config: &ScenarioConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    match &config.geometry {
        GeometrySpec::Torus {
            nx,
            ny,
            length,
            sigma0_modes,
        } => {
            kv("geometry.kind", "torus".into());
            kv("geometry.nx", nx.to_string());
            kv("geometry.ny", ny.to_string());
            kv("geometry.length", format!("{length:?}"));
            kv("geometry.sigma0_modes", fmt_triples(sigma0_modes));
        }
        GeometrySpec::Sphere { nmu } => {
            kv("geometry.kind", "sphere".into());
            kv("geometry.nmu", nmu.to_string());
        }
    }
    match &config.initial {
        InitialSpec::Zero => kv("initial.kind", "zero".into()),
        InitialSpec::Cosines(m) => {
            kv("initial.kind", "cosines".into());
            kv("initial.cosines", fmt_triples(m));
        }
        InitialSpec::Polynomial(c) => {
            kv("initial.kind", "polynomial".into());
            kv("initial.coefficients", fmt_floats(c));
        }
        InitialSpec::RandomSmooth(r) => {
            kv("initial.kind", "random_smooth".into());
            kv("initial.seed", r.seed.to_string());
            kv("initial.modes", r.modes.to_string());
            kv("initial.decay", format!("{:?}", r.decay));
            kv("initial.target_sup_f", format!("{:?}", r.target_sup_f));
        }
    }
    let f = &config.flow;
    kv(
        "flow.scheme",
        match f.scheme {
            Scheme::Rk4 => "rk4",
            Scheme::SemiImplicit => "semi_implicit",
        }
        .into(),
    );
    kv(
        "flow.kind",
        match f.flow_kind {
            FlowKind::Pcf => "pcf",
            FlowKind::Nkrf => "nkrf",
        }
        .into(),
    );
    kv("flow.dt_init", format!("{:?}", f.dt_init));
    kv("flow.cfl", format!("{:?}", f.cfl));
    kv("flow.t_end", format!("{:?}", f.t_end));
    kv("flow.rho_floor", format!("{:?}", f.rho_floor));
    kv("flow.max_halvings", f.max_halvings.to_string());
    kv("flow.poisson_tol", format!("{:?}", f.poisson_tol));
    kv("flow.p_list", fmt_floats(&f.p_list));
    kv("output.path", config.output.path.clone());
    kv("output.record_every", f.record_every.to_string());
    kv("output.emit_fields", config.output.emit_fields.to_string());
    kv("output.checkpoint_every", config.output.checkpoint_every.to_string());
    s
}

/// Builds the initial potential described by `spec` on `geom`.
pub fn make_initial(geom: &Geometry, spec: &InitialSpec) -> Result<ScalarField> {
    match (spec, geom) {
        (InitialSpec::Zero, _) => Ok(geom.zeros()),
        (InitialSpec::Cosines(modes), Geometry::Torus(t)) => {
            let base = 2.0 * PI / t.length();
            Ok(t.sample(|x, y| {
                modes
                    .iter()
                    .map(|m| m.amplitude * (base * (m.kx as f64 * x + m.ky as f64 * y)).cos())
                    .sum()
            }))
        }
        (InitialSpec::Polynomial(c), Geometry::Sphere(s)) => {
            // Horner evaluation of Σ c_i μ^i
            Ok(s.sample(|mu| c.iter().rev().fold(0.0, |acc, &ci| acc * mu + ci)))
        }
        (InitialSpec::RandomSmooth(r), _) => random_smooth(geom, r),
        (InitialSpec::Cosines(_), _) => Err(PcfError::validation("initial.kind", "cosine initial data needs a torus")),
        (InitialSpec::Polynomial(_), _) => {
            Err(PcfError::validation("initial.kind", "polynomial initial data needs a sphere"))
        }
    }
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
fn legendre(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for n in 1..l {
        let n = n as f64;
        let p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn random_profile(geom: &Geometry, r: &RandomSmooth) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let m = r.modes as i64;
    match geom {
        Geometry::Torus(t) => {
            // one representative per ±k pair: ky > 0, or ky = 0 and kx > 0
            let mut terms = Vec::new();
            for ky in 0..=m {
                for kx in -m..=m {
                    if ky == 0 && kx <= 0 {
                        continue;
                    }
                    let norm = ((kx * kx + ky * ky) as f64).sqrt();
                    let scale = norm.powf(-r.decay);
                    let a: f64 = rng.gen_range(-1.0..1.0);
                    let b: f64 = rng.gen_range(-1.0..1.0);
                    terms.push((kx as f64, ky as f64, scale * a, scale * b));
                }
            }
            let base = 2.0 * PI / t.length();
            t.sample(|x, y| {
                terms
                    .iter()
                    .map(|&(kx, ky, a, b)| {
                        let arg = base * (kx * x + ky * y);
                        a * arg.cos() + b * arg.sin()
                    })
                    .sum()
            })
        }
        Geometry::Sphere(s) => {
            // Legendre modes in 2μ − 1 are the S¹-invariant spherical harmonics
            let coeffs: Vec<f64> = (1..=r.modes)
                .map(|l| (l as f64).powf(-r.decay) * rng.gen_range(-1.0..1.0))
                .collect();
            s.sample(|mu| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * legendre(i + 1, 2.0 * mu - 1.0))
                    .sum()
            })
        }
    }
}

fn sup_log(lap: &ScalarField, s: f64) -> f64 {
    let hi = (1.0 + s * lap.max()).ln();
    let lo = (1.0 + s * lap.min()).ln();
    hi.abs().max(lo.abs())
}

fn random_smooth(geom: &Geometry, r: &RandomSmooth) -> Result<ScalarField> {
    let phi = random_profile(geom, r);
    let lap = geom.laplacian0(&phi)?;
    let target = r.target_sup_f;
    // sup|log(1 + s Δ₀φ)| increases with s on the admissible range
    let s_max = if lap.min() < 0.0 { -1.0 / lap.min() } else { f64::INFINITY };
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(0.5 * s_max);
    let mut expansions = 0;
    while sup_log(&lap, hi) < target {
        lo = hi;
        hi = if s_max.is_finite() { 0.5 * (hi + s_max) } else { 2.0 * hi };
        expansions += 1;
        if expansions > 200 || !hi.is_finite() {
            return Err(PcfError::NotKahler {
                min_rho: 1.0 + hi * lap.min(),
                stage: None,
            });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sup_log(&lap, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scaled = phi.scale(hi);
    let achieved = geom.laplacian0(&scaled)?.map(|l| (1.0 + l).ln()).sup_abs();
    if !((achieved - target).abs() <= 0.01 * target) {
        return Err(PcfError::NotKahler {
            min_rho: geom.laplacian0(&scaled)?.min() + 1.0,
            stage: None,
        });
    }
    Ok(scaled)
}
