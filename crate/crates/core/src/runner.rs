//! Scenario configuration, point drivers, the worker pool and run manifests.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams, Reduced, WaveFunction, HBAR};
use crate::potentials::cavity_potential;
use crate::propagator::{
    bounce_time, evolve_until_scattered, relevant_wavenumber, DtPolicy, EvolutionRecord, Sampling, StopReason,
    StopRules,
};
use crate::resonances::{
    find_resonances, lorentzian_model, track_vs_gravity, write_resonance_csv, Resonance, ScalingSetup, Trajectory,
    DEFAULT_BASIS, DEFAULT_BOX, DEFAULT_THETA,
};
use crate::scattering::transmission_spectrum;
use crate::sensing::{
    bragg_column, displacement_term_ratio, fit_barrier_height, project, rel_uncertainty_minus, rel_uncertainty_r,
    write_bragg_csv, BraggRow, Map, SensitivityMap, TransmissionObservables, Variant,
};
use crate::svg;
use crate::wavepackets::{gaussian_packet, moments, symmetric_superposition, write_wavefunction_csv};

pub const VERSION: &str = concat!("mwfpi ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Spectrum,
    Transmit,
    Sweep,
    Resonances,
    Asymmetric,
    BraggTable,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Spectrum,
        Scenario::Transmit,
        Scenario::Sweep,
        Scenario::Resonances,
        Scenario::Asymmetric,
        Scenario::BraggTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Transmit => "transmit",
            Scenario::Sweep => "sweep",
            Scenario::Resonances => "resonances",
            Scenario::Asymmetric => "asymmetric",
            Scenario::BraggTable => "bragg-table",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// Either an explicit list or `n` evenly spaced values from `from` to `to`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Linspace { from: f64, to: f64, n: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Linspace { from, to, n } => match n {
                0 => vec![],
                1 => vec![*from],
                _ => (0..*n).map(|i| from + (to - from) * i as f64 / (*n - 1) as f64).collect(),
            },
        }
    }

    fn check(&self, name: &str, min_len: usize) -> Result<Vec<f64>> {
        let v = self.values();
        if v.len() < min_len {
            return Err(Error::Config(format!("{name} needs at least {min_len} values, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!("{name} must be finite and strictly increasing")));
        }
        Ok(v)
    }
}

/// Periodic grid in `σ_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::symmetric(self.half_width, self.n_points)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub dt_policy: DtPolicy,
    /// Wall-clock cap on a single propagation, seconds of physical time.
    pub t_cap_s: f64,
    /// Outflow ramp width in `σ_b`; `null` keeps the grid closed.
    pub outflow_ramp: Option<f64>,
    pub spectrum_tolerance: f64,
    pub theta: f64,
    pub basis_size: usize,
    pub box_half_width: f64,
    /// Upper end of the resonance search window, `V_b`.
    pub e_max: f64,
    pub check_basis: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            dt_policy: DtPolicy::default(),
            t_cap_s: 1.0,
            outflow_ramp: Some(100.0),
            spectrum_tolerance: 1e-3,
            theta: DEFAULT_THETA,
            basis_size: DEFAULT_BASIS,
            box_half_width: DEFAULT_BOX,
            e_max: 1.25,
            check_basis: false,
        }
    }
}

impl SolverSettings {
    pub fn scaling(&self) -> ScalingSetup {
        ScalingSetup { theta: self.theta, basis_size: self.basis_size, half_width: self.box_half_width }
    }
}

/// Intra-cavity superposition setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymmetricSpec {
    pub packet_width_m: f64,
    /// Stop after this many lifetimes `ħ/Γ` of the reference resonance.
    pub lifetimes: f64,
    /// 0-based index of the reference resonance at g = 0.
    pub resonance_index: usize,
    /// Initial displacement used for the dropped-term check, metres.
    pub displacement_m: f64,
}

impl Default for AsymmetricSpec {
    fn default() -> Self {
        AsymmetricSpec { packet_width_m: 3e-6, lifetimes: 2.0, resonance_index: 2, displacement_m: 2e-6 }
    }
}

/// One JSON document per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<Scenario>,
    pub model: ModelParams,
    pub grid: GridSpec,
    pub solver: SolverSettings,
    /// Gravity axis in m/s².
    pub gravities_m_s2: Axis,
    /// `E/V_b` at the cavity center for transmission runs, kick energy for the
    /// asymmetric setup, or the spectrum energy axis.
    pub energies: Axis,
    pub asymmetric: AsymmetricSpec,
    pub svg: bool,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: None,
            model: ModelParams::reference(),
            grid: GridSpec { half_width: 600.0, n_points: 4096 },
            solver: SolverSettings::default(),
            gravities_m_s2: Axis::Linspace { from: -1.3e-3, to: 1.3e-3, n: 30 },
            energies: Axis::Linspace { from: 0.2, to: 1.3, n: 30 },
            asymmetric: AsymmetricSpec::default(),
            svg: true,
            output_dir: None,
        }
    }
}

/// Sets `dotted.key` in a JSON document; the value is parsed as JSON and
/// falls back to a string.
pub fn apply_override(doc: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override path '{key}' crosses a non-object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| serde_json::json!({}));
    }
    Err(Error::Config("empty override key".into()))
}

impl ScenarioConfig {
    /// Parses a JSON document, applying overrides before deserialization.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        if !doc.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self, scenario: Scenario) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.grid.n_points < Grid::MIN_POINTS || !(self.grid.half_width > 0.0) {
            return Err(Error::Config("grid needs half_width > 0 and at least 256 points".into()));
        }
        if !(self.solver.t_cap_s > 0.0) {
            return Err(Error::Config("solver.t_cap_s must be positive".into()));
        }
        if let Some(r) = self.solver.outflow_ramp {
            if !(r > 0.0) || 2.0 * r >= self.grid.half_width {
                return Err(Error::Config("solver.outflow_ramp must be positive and below half the grid half-width".into()));
            }
        }
        match scenario {
            Scenario::Spectrum => {
                self.energies.check("energies", 2)?;
                if self.model.gravity_m_s2 != 0.0 {
                    return Err(Error::Config("spectrum needs model.gravity_m_s2 = 0".into()));
                }
            }
            Scenario::Transmit => {
                self.energies.check("energies", 1)?;
            }
            Scenario::Sweep => {
                self.energies.check("energies", 1)?;
                self.gravities_m_s2.check("gravities_m_s2", 1)?;
            }
            Scenario::Asymmetric => {
                self.energies.check("energies", 3)?;
                self.gravities_m_s2.check("gravities_m_s2", 3)?;
            }
            Scenario::Resonances => {
                let g = self.gravities_m_s2.check("gravities_m_s2", 1)?;
                if !g.contains(&0.0) {
                    return Err(Error::Config("gravities_m_s2 must include 0".into()));
                }
            }
            Scenario::BraggTable => {}
        }
        Ok(())
    }
}

/// Runs `f` over `points` on `workers` threads. Results keep the input order;
/// a panic inside `f` becomes an `Err` for that point only.
pub fn parallel_map<P, T, F>(points: &[P], workers: usize, f: F) -> Vec<std::result::Result<T, String>>
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> Result<T> + Sync,
{
    let call = |p: &P| match catch_unwind(AssertUnwindSafe(|| f(p))) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(payload) => Err(panic_message(payload)),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| points.par_iter().map(call).collect()),
        Err(_) => points.iter().map(call).collect(),
    }
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    let msg = payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("panic: {msg}")
}

/// Result of one wave-packet scattering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitOutcome {
    pub gravity_m_s2: f64,
    pub energy: f64,
    pub observables: TransmissionObservables,
    pub stop_reason: StopReason,
    pub final_time_s: f64,
    pub steps: usize,
    pub dt: f64,
    pub final_cavity_population: f64,
    pub outflow: (f64, f64),
}

fn outcome(params: &ModelParams, energy: f64, obs: TransmissionObservables, rec: &EvolutionRecord) -> Result<TransmitOutcome> {
    Ok(TransmitOutcome {
        gravity_m_s2: params.gravity_m_s2,
        energy,
        observables: obs,
        stop_reason: rec.stop_reason.unwrap_or(StopReason::TimeLimit),
        final_time_s: params.scales()?.time_to_si(rec.final_time()),
        steps: rec.steps,
        dt: rec.dt,
        final_cavity_population: rec.cavity_population.last().copied().unwrap_or(f64::NAN),
        outflow: rec.outflow,
    })
}

/// Packet launched from the model's packet center with kinetic energy
/// `energy` (in `V_b`) at the cavity center, propagated until it has scattered.
pub fn transmit_point(
    params: &ModelParams,
    energy: f64,
    grid: &GridSpec,
    solver: &SolverSettings,
    sampling: Sampling,
) -> Result<(WaveFunction, EvolutionRecord, TransmitOutcome)> {
    let mut r = params.reduced()?;
    r.packet_wavenumber = r.launch_wavenumber(energy).ok_or_else(|| {
        Error::InvalidParameter(format!("E/V_b = {energy} is below the launch-energy floor {}", r.tilt * r.packet_center))
    })?;
    let grid = grid.build()?;
    let psi0 = gaussian_packet(&r, grid.clone())?;
    let potential = cavity_potential(&r, grid);
    let dt = solver.dt_policy.dt(r.stiffness, relevant_wavenumber(&r, &moments(&psi0)), &potential);
    let t_cap = params.scales()?.time_from_si(solver.t_cap_s);
    let mut rules = StopRules::new(t_cap, bounce_time(&r, r.packet_wavenumber));
    if let Some(ramp) = solver.outflow_ramp {
        rules = rules.with_outflow(ramp);
    }
    let (psi, rec) = evolve_until_scattered(&psi0, &potential, &r, dt, r.interaction, rules, sampling, false)?;
    let obs = project(&psi, r.barriers(), rec.outflow);
    let out = outcome(params, energy, obs, &rec)?;
    Ok((psi, rec, out))
}

/// Stop time `lifetimes · ħ/Γ_j` in `ħ/V_b` from the zero-gravity resonances.
pub fn asymmetric_stop_time(params: &ModelParams, solver: &SolverSettings, spec: &AsymmetricSpec) -> Result<f64> {
    let mut p0 = *params;
    p0.gravity_m_s2 = 0.0;
    let set = find_resonances(&p0.reduced()?, &solver.scaling(), solver.e_max, false)?;
    let res = set.resonances.get(spec.resonance_index).ok_or_else(|| {
        Error::InvalidParameter(format!("only {} resonances found, need index {}", set.resonances.len(), spec.resonance_index))
    })?;
    Ok(spec.lifetimes / res.width)
}

/// Symmetric superposition at the cavity center with kick energy `kick`
/// (`V_b`), propagated for `t_stop` (`ħ/V_b`).
pub fn asymmetric_point(
    params: &ModelParams,
    kick: f64,
    t_stop: f64,
    grid: &GridSpec,
    solver: &SolverSettings,
    spec: &AsymmetricSpec,
) -> Result<(WaveFunction, EvolutionRecord, TransmitOutcome)> {
    let mut p = *params;
    p.packet_width_m = spec.packet_width_m;
    p.packet_center_m = 0.0;
    let r: Reduced = p.reduced()?;
    let k = r.wavenumber(kick);
    let grid = grid.build()?;
    let psi0 = symmetric_superposition(r.packet_width, k, r.barrier_center, grid.clone())?;
    let potential = cavity_potential(&r, grid);
    let dt = solver.dt_policy.dt(r.stiffness, k + 6.0 / (2.0 * r.packet_width), &potential);
    let mut rules = StopRules::fixed_time(t_stop);
    if let Some(ramp) = solver.outflow_ramp {
        rules = rules.with_outflow(ramp);
    }
    let (psi, rec) = evolve_until_scattered(&psi0, &potential, &r, dt, r.interaction, rules, Sampling::default(), false)?;
    let obs = project(&psi, r.barriers(), rec.outflow);
    let out = outcome(&p, kick, obs, &rec)?;
    Ok((psi, rec, out))
}

/// Per-point bookkeeping in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub label: String,
    pub stop_reason: Option<StopReason>,
    pub wall_time_s: f64,
    pub error: Option<String>,
    pub diagnostics: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub workers: usize,
    pub points: Vec<PointRecord>,
    pub failures: usize,
    /// SHA-256 of every output file except the manifest itself.
    pub files: BTreeMap<String, String>,
    pub wall_time_s: f64,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.failures == 0 {
            0
        } else {
            2
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Output {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

fn timed<P, T, F>(points: &[P], workers: usize, f: F) -> Vec<(std::result::Result<T, String>, f64)>
where
    P: Sync,
    T: Send,
    F: Fn(&P) -> Result<T> + Sync,
{
    parallel_map(points, workers, |p| {
        let start = Instant::now();
        let v = f(p);
        Ok((v.map_err(|e| e.to_string()), start.elapsed().as_secs_f64()))
    })
    .into_iter()
    .map(|r| match r {
        Ok((v, t)) => (v, t),
        Err(e) => (Err(e), 0.0),
    })
    .collect()
}

fn transmit_record(label: String, res: &std::result::Result<TransmitOutcome, String>, wall: f64) -> PointRecord {
    match res {
        Ok(o) => PointRecord {
            label,
            stop_reason: Some(o.stop_reason),
            wall_time_s: wall,
            error: None,
            diagnostics: serde_json::json!({
                "final_time_s": o.final_time_s,
                "steps": o.steps,
                "dt": o.dt,
                "cavity_population": o.final_cavity_population,
                "outflow": [o.outflow.0, o.outflow.1],
            }),
        },
        Err(e) => PointRecord { label, stop_reason: None, wall_time_s: wall, error: Some(e.clone()), diagnostics: serde_json::Value::Null },
    }
}

fn map_of(values: &[Vec<Option<TransmissionObservables>>], f: impl Fn(&TransmissionObservables) -> f64) -> Map {
    values.iter().map(|row| row.iter().map(|o| o.as_ref().map_or(f64::NAN, &f)).collect()).collect()
}

/// Executes one scenario and writes its outputs plus `manifest.json` into `out`.
pub fn run(config: &ScenarioConfig, scenario: Scenario, out: &Path, workers: usize) -> Result<RunManifest> {
    config.validate(scenario)?;
    let start = Instant::now();
    let mut output = Output::new(out)?;
    let mut points = Vec::new();
    let summary = match scenario {
        Scenario::Spectrum => run_spectrum(config, &mut output)?,
        Scenario::Transmit => run_transmit(config, &mut output, &mut points)?,
        Scenario::Sweep => run_sweep(config, &mut output, &mut points, workers)?,
        Scenario::Resonances => run_resonances(config, &mut output, &mut points, workers)?,
        Scenario::Asymmetric => run_asymmetric(config, &mut output, &mut points, workers)?,
        Scenario::BraggTable => run_bragg(config, &mut output)?,
    };
    let failures = points.iter().filter(|p| p.error.is_some()).count();
    let manifest = RunManifest {
        version: VERSION.into(),
        scenario,
        config: config.clone(),
        workers,
        points,
        failures,
        files: output.files,
        wall_time_s: start.elapsed().as_secs_f64(),
        summary,
    };
    std::fs::write(out.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

fn run_spectrum(config: &ScenarioConfig, output: &mut Output) -> Result<serde_json::Value> {
    let r = config.model.reduced()?;
    let energies = config.energies.values();
    let spec = transmission_spectrum(&r, &energies, config.solver.spectrum_tolerance)?;
    output.write_with("spectrum.csv", |b| spec.write_csv(b))?;
    output.write("spectrum.json", &serde_json::to_vec_pretty(&spec.sidecar())?)?;
    let res = find_resonances(&r, &config.solver.scaling(), config.solver.e_max, false)?;
    let overlay = lorentzian_model(&res.resonances)?;
    let lor: Vec<f64> = energies.iter().map(|e| overlay.eval(*e)).collect();
    output.write_with("spectrum_lorentzian.csv", |b| {
        use std::io::Write;
        writeln!(b, "E_over_Vb,lorentzian")?;
        for (e, v) in energies.iter().zip(&lor) {
            writeln!(b, "{e:.8e},{v:.10e}")?;
        }
        Ok(())
    })?;
    if config.svg {
        let plot = svg::line_plot(
            "Transmission |tau|^2",
            "E / V_b",
            "|tau|^2",
            &[
                svg::Series { label: "transfer matrix", x: &energies, y: &spec.tau_sq },
                svg::Series { label: "Lorentzian overlay", x: &energies, y: &lor },
            ],
        );
        output.write("spectrum.svg", plot.as_bytes())?;
    }
    Ok(serde_json::json!({
        "converged": spec.converged,
        "n_steps": spec.n_steps,
        "resonances": res.resonances,
    }))
}

fn run_transmit(config: &ScenarioConfig, output: &mut Output, points: &mut Vec<PointRecord>) -> Result<serde_json::Value> {
    let energy = config.energies.values()[0];
    let scales = config.model.scales()?;
    let sampling = Sampling { stride: 200, moments: true, densities: false };
    let start = Instant::now();
    let res = transmit_point(&config.model, energy, &config.grid, &config.solver, sampling);
    let wall = start.elapsed().as_secs_f64();
    let label = format!("g={:e},E={energy}", config.model.gravity_m_s2);
    match res {
        Ok((psi, rec, out)) => {
            output.write_with("moments.csv", |b| rec.write_moments_csv(&scales, b))?;
            output.write_with("final_state.csv", |b| write_wavefunction_csv(&psi, &scales, b))?;
            output.write("transmit.json", &serde_json::to_vec_pretty(&out)?)?;
            let r = config.model.reduced()?;
            let pot = cavity_potential(&r, config.grid.build()?);
            output.write_with("potential.csv", |b| pot.write_csv(&scales, b))?;
            points.push(transmit_record(label, &Ok(out.clone()), wall));
            Ok(serde_json::to_value(out)?)
        }
        Err(e) => {
            points.push(transmit_record(label, &Err(e.to_string()), wall));
            Ok(serde_json::Value::Null)
        }
    }
}

fn grid_points(g: &[f64], e: &[f64]) -> Vec<(usize, usize)> {
    (0..g.len()).flat_map(|i| (0..e.len()).map(move |j| (i, j))).collect()
}

fn collect_grid(
    g: &[f64],
    e: &[f64],
    results: Vec<(std::result::Result<TransmitOutcome, String>, f64)>,
    points: &mut Vec<PointRecord>,
) -> Vec<Vec<Option<TransmissionObservables>>> {
    let mut obs = vec![vec![None; e.len()]; g.len()];
    for ((i, j), (res, wall)) in grid_points(g, e).into_iter().zip(results) {
        if let Ok(o) = &res {
            obs[i][j] = Some(o.observables);
        }
        points.push(transmit_record(format!("g={:e},E={}", g[i], e[j]), &res, wall));
    }
    obs
}

fn heatmap_svg(title: &str, map: &SensitivityMap) -> String {
    svg::heatmap(title, "E / V_b", "g [m/s^2]", &map.energies, &map.g_m_s2, &map.delta_g, true)
}

fn run_sweep(config: &ScenarioConfig, output: &mut Output, points: &mut Vec<PointRecord>, workers: usize) -> Result<serde_json::Value> {
    let g = config.gravities_m_s2.values();
    let e = config.energies.values();
    let pts = grid_points(&g, &e);
    let results = timed(&pts, workers, |(i, j)| {
        let mut p = config.model;
        p.gravity_m_s2 = g[*i];
        transmit_point(&p, e[*j], &config.grid, &config.solver, Sampling::default()).map(|x| x.2)
    });
    let obs = collect_grid(&g, &e, results, points);
    let t = map_of(&obs, |o| o.t_r);
    let spread = map_of(&obs, |o| o.var_t_r.max(0.0).sqrt());
    let tilt_z0: Vec<f64> = g
        .iter()
        .map(|gi| config.model.mass_kg * gi * config.model.packet_center_m / config.model.barrier_height_j)
        .collect();
    let mut summary = serde_json::Map::new();
    for (variant, full, name) in [(Variant::Full, true, "sweep_full"), (Variant::Intrinsic, false, "sweep_intrinsic")] {
        // derivatives need three points per axis; smaller sweeps report T only
        let delta = if g.len() >= 3 && e.len() >= 3 {
            rel_uncertainty_r(&t, &g, &e, &tilt_z0, full)?
        } else {
            vec![vec![f64::NAN; e.len()]; g.len()]
        };
        let map = SensitivityMap {
            g_m_s2: g.clone(),
            energies: e.clone(),
            transmission: t.clone(),
            spread: spread.clone(),
            delta_g: delta,
            variant,
            stencil: "central differences, one-sided at edges".into(),
        };
        output.write_with(&format!("{name}.csv"), |b| map.write_csv(b))?;
        if config.svg {
            output.write(&format!("{name}.svg"), heatmap_svg(&format!("sqrt(N nu) dg_R ({variant})"), &map).as_bytes())?;
        }
        summary.insert(variant.to_string(), minimum_json(&map));
    }
    Ok(serde_json::Value::Object(summary))
}

fn minimum_json(map: &SensitivityMap) -> serde_json::Value {
    match map.minimum() {
        Some((v, g, e)) => serde_json::json!({ "min_delta_g_scaled": v, "g_m_s2": g, "E_over_Vb": e }),
        None => serde_json::Value::Null,
    }
}

fn run_asymmetric(config: &ScenarioConfig, output: &mut Output, points: &mut Vec<PointRecord>, workers: usize) -> Result<serde_json::Value> {
    let g = config.gravities_m_s2.values();
    let kicks = config.energies.values();
    let spec = config.asymmetric;
    let t_stop = asymmetric_stop_time(&config.model, &config.solver, &spec)?;
    let pts = grid_points(&g, &kicks);
    let results = timed(&pts, workers, |(i, j)| {
        let mut p = config.model;
        p.gravity_m_s2 = g[*i];
        asymmetric_point(&p, kicks[*j], t_stop, &config.grid, &config.solver, &spec).map(|x| x.2)
    });
    let obs = collect_grid(&g, &kicks, results, points);
    let t_minus = map_of(&obs, |o| o.t_minus);
    let t_plus = map_of(&obs, |o| o.t_plus);
    let delta = rel_uncertainty_minus(&t_minus, &t_plus, &g, &kicks)?;
    let map = SensitivityMap {
        g_m_s2: g.clone(),
        energies: kicks.clone(),
        transmission: t_minus.clone(),
        spread: map_of(&obs, |o| o.var_t_minus.max(0.0).sqrt()),
        delta_g: delta,
        variant: Variant::Asymmetric,
        stencil: "central differences, one-sided at edges".into(),
    };
    output.write_with("asymmetric.csv", |b| map.write_csv(b))?;
    output.write_with("asymmetric_observables.csv", |b| {
        use std::io::Write;
        writeln!(b, "g_m_s2,kick_over_Vb,T_L,T_R,T_plus,T_minus")?;
        for (i, row) in obs.iter().enumerate() {
            for (j, o) in row.iter().enumerate() {
                match o {
                    Some(o) => writeln!(b, "{:.6e},{:.6e},{:.10e},{:.10e},{:.10e},{:.10e}", g[i], kicks[j], o.t_l, o.t_r, o.t_plus, o.t_minus)?,
                    None => writeln!(b, "{:.6e},{:.6e},nan,nan,nan,nan", g[i], kicks[j])?,
                }
            }
        }
        Ok(())
    })?;
    if config.svg {
        output.write("asymmetric.svg", heatmap_svg("sqrt(N nu) dg_- (asymmetric)", &map).as_bytes())?;
    }
    let tilt_z0: Vec<f64> = g
        .iter()
        .map(|gi| config.model.mass_kg * gi * spec.displacement_m / config.model.barrier_height_j)
        .collect();
    let ratio = displacement_term_ratio(&t_minus, &g, &kicks, &tilt_z0)?;
    let scales = config.model.scales()?;
    Ok(serde_json::json!({
        "stop_time_s": scales.time_to_si(t_stop),
        "minimum": minimum_json(&map),
        "displacement_m": spec.displacement_m,
        "displacement_term_ratio": ratio,
    }))
}

fn tilt_per_gravity(params: &ModelParams) -> Result<f64> {
    let s = params.scales()?;
    Ok(params.mass_kg * s.length / s.energy)
}

fn run_resonances(config: &ScenarioConfig, output: &mut Output, points: &mut Vec<PointRecord>, workers: usize) -> Result<serde_json::Value> {
    let g = config.gravities_m_s2.values();
    let per_g = tilt_per_gravity(&config.model)?;
    let tilts: Vec<f64> = g.iter().map(|x| x * per_g).collect();
    let r = config.model.reduced()?;
    let setup = config.solver.scaling();
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| Error::Config(e.to_string()))?;
    let tracks: Vec<Trajectory> = pool.install(|| track_vs_gravity(&r, &tilts, &setup, config.solver.e_max))?;
    points.push(PointRecord {
        label: "track_vs_gravity".into(),
        stop_reason: None,
        wall_time_s: start.elapsed().as_secs_f64(),
        error: None,
        diagnostics: serde_json::json!({ "tracks": tracks.len() }),
    });
    let mut rows: Vec<(f64, Resonance)> = Vec::new();
    for (k, gk) in g.iter().enumerate() {
        for t in &tracks {
            rows.push((
                *gk,
                Resonance {
                    energy: t.energies[k],
                    width: t.widths[k],
                    theta: setup.theta,
                    plateau: if t.on_plateau[k] { setup.theta * 0.1 } else { 0.0 },
                    plateau_shift: f64::NAN,
                    index: t.track,
                    track: t.track,
                },
            ));
        }
    }
    output.write_with("resonances.csv", |b| write_resonance_csv(&rows, b))?;
    output.write_with("triangular.csv", |b| {
        use std::io::Write;
        writeln!(b, "track,g_m_s2,Er_over_Vb,triangular_offset_over_Vb,Gamma_over_Vb")?;
        for t in &tracks {
            let last = g.len() - 1;
            let edge = if g[0].abs() > g[last].abs() { 0 } else { last };
            writeln!(
                b,
                "{},{:.6e},{:.10e},{},{:.10e}",
                t.track,
                g[edge],
                t.energies[edge],
                t.triangular_offset.map_or("nan".into(), |v| format!("{v:.10e}")),
                t.widths[edge]
            )?;
        }
        Ok(())
    })?;
    if config.svg {
        let es: Vec<Vec<f64>> = tracks.iter().map(|t| t.energies.clone()).collect();
        let ws: Vec<Vec<f64>> = tracks.iter().map(|t| t.widths.iter().map(|w| w.log10()).collect()).collect();
        let labels: Vec<String> = tracks.iter().map(|t| format!("j = {}", t.track)).collect();
        let series = |ys: &'_ [Vec<f64>]| -> Vec<(String, Vec<f64>)> { labels.iter().cloned().zip(ys.iter().cloned()).collect() };
        for (name, title, ylabel, data) in [
            ("resonances_energy.svg", "Resonance energies", "E_r / V_b", series(&es)),
            ("resonances_width.svg", "Resonance widths", "log10 Gamma / V_b", series(&ws)),
        ] {
            let s: Vec<svg::Series> = data.iter().map(|(l, y)| svg::Series { label: l, x: &g, y }).collect();
            output.write(name, svg::line_plot(title, "g [m/s^2]", ylabel, &s).as_bytes())?;
        }
    }
    Ok(serde_json::to_value(&tracks)?)
}

fn run_bragg(config: &ScenarioConfig, output: &mut Output) -> Result<serde_json::Value> {
    let mut p = config.model;
    p.gravity_m_s2 = 0.0;
    let r = p.reduced()?;
    let set = find_resonances(&r, &config.solver.scaling(), config.solver.e_max, config.solver.check_basis)?;
    let pairs: Vec<(f64, f64)> = set.resonances.iter().map(|x| (x.energy, x.width)).collect();
    let omegas = bragg_column(&pairs, p.barrier_height_j, p.mass_kg, p.bragg_wavevector_1_m)?;
    let rows: Vec<BraggRow> = pairs
        .iter()
        .zip(&omegas)
        .map(|((e, w), o)| BraggRow { er_over_vb: *e, gamma_over_vb: *w, omega_over_2pi_hz: *o })
        .collect();
    output.write_with("bragg_table.csv", |b| write_bragg_csv(&rows, b))?;
    let zero: Vec<(f64, Resonance)> = set.resonances.iter().map(|x| (0.0, *x)).collect();
    output.write_with("resonances.csv", |b| write_resonance_csv(&zero, b))?;
    let refit = fit_barrier_height(&pairs, &omegas, p.mass_kg, p.bragg_wavevector_1_m)?;
    let scales = p.scales()?;
    Ok(serde_json::json!({
        "rows": rows,
        "barrier_height_J": p.barrier_height_j,
        "consistency_fit_barrier_height_J": refit.0,
        "lifetimes_s": set.resonances.iter().map(|x| x.lifetime_s(&scales)).collect::<Vec<_>>(),
        "basis_shift": set.basis_shift,
        "warnings": set.warnings,
        "lifetime_unit_s": HBAR / scales.energy,
    }))
}

/// Names of every regular file in `dir` that the manifest does not list.
pub fn unlisted_files(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>> {
    let mut missing = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name != MANIFEST_FILE && !manifest.files.contains_key(&name) {
            missing.push(name);
        }
    }
    Ok(missing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_and_overrides() {
        assert_eq!(Axis::Linspace { from: 0.0, to: 1.0, n: 3 }.values(), vec![0.0, 0.5, 1.0]);
        let mut doc = serde_json::json!({ "grid": { "half_width": 10.0 } });
        apply_override(&mut doc, "grid.n_points=512").unwrap();
        apply_override(&mut doc, "solver.dt_policy.safety=8").unwrap();
        apply_override(&mut doc, "scenario=sweep").unwrap();
        assert_eq!(doc["grid"]["n_points"], 512);
        assert_eq!(doc["solver"]["dt_policy"]["safety"], 8);
        assert_eq!(doc["scenario"], "sweep");
        assert!(apply_override(&mut doc, "novalue").is_err());
        assert!(apply_override(&mut doc, "grid.n_points.x=1").is_err());
    }

    #[test]
    fn config_validation() {
        let c = ScenarioConfig::from_json("{}", &[]).unwrap();
        assert!(c.validate(Scenario::Sweep).is_ok());
        let single = ScenarioConfig::from_json("{}", &["gravities_m_s2=[0.0]".into(), "energies=[0.5]".into()]).unwrap();
        assert!(single.validate(Scenario::Sweep).is_ok());
        assert!(single.validate(Scenario::Asymmetric).is_err());
        let bad = ScenarioConfig::from_json("{}", &["gravities_m_s2=[0.1, 0.0, 0.2]".into()]).unwrap();
        assert!(matches!(bad.validate(Scenario::Sweep), Err(Error::Config(_))));
        assert!(ScenarioConfig::from_json("{\"unknown\": 1}", &[]).is_err());
        assert!(ScenarioConfig::from_json("[1]", &[]).is_err());
        let g = ScenarioConfig::from_json("{}", &["model.gravity_m_s2=1e-3".into()]).unwrap();
        assert!(g.validate(Scenario::Spectrum).is_err());
        let res = ScenarioConfig::from_json("{}", &["gravities_m_s2=[1e-3, 2e-3]".into()]).unwrap();
        assert!(res.validate(Scenario::Resonances).is_err());
        assert_eq!("bragg-table".parse::<Scenario>().unwrap(), Scenario::BraggTable);
        assert!("nope".parse::<Scenario>().is_err());
    }

    #[test]
    fn pool_order_and_panics() {
        let pts: Vec<i32> = (0..50).collect();
        let f = |x: &i32| {
            if *x == 7 {
                panic!("boom at {x}");
            }
            if *x == 9 {
                return Err(Error::InvalidParameter("nine".into()));
            }
            Ok(x * x)
        };
        let one = parallel_map(&pts, 1, f);
        let four = parallel_map(&pts, 4, f);
        assert_eq!(one, four);
        assert_eq!(one[3], Ok(9));
        assert!(one[7].as_ref().unwrap_err().contains("boom at 7"));
        assert!(one[9].as_ref().unwrap_err().contains("nine"));
        let empty: Vec<i32> = vec![];
        assert!(parallel_map(&empty, 3, f).is_empty());
    }

    #[test]
    fn bragg_scenario_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = ScenarioConfig { svg: false, ..ScenarioConfig::default() };
        let m = run(&c, Scenario::BraggTable, dir.path(), 1).unwrap();
        assert_eq!(m.exit_code(), 0);
        assert!(m.files.contains_key("bragg_table.csv"));
        assert!(unlisted_files(dir.path(), &m).unwrap().is_empty());
        let text = std::fs::read_to_string(dir.path().join("bragg_table.csv")).unwrap();
        assert_eq!(text.lines().count(), 8);
    }
}
