//! Split-step Fourier evolution for the Schrödinger and 1D Gross–Pitaevskii
//! equations, with the scattering stop rules.
//!
//! One step is `K(dt/2) V(dt) K(dt/2)`. Consecutive half kinetic steps are
//! merged between observations. The mean-field phase `γ|ψ|²dt` uses the density
//! at the start of the potential substep, which the substep leaves unchanged.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, Reduced, Representation, Scales, WaveFunction};
use crate::potentials::{PotentialField, PotentialTerm};
use crate::wavepackets::{moments, PacketMoments};

/// Edge density that signals wrap-around.
pub const EDGE_DENSITY_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TimeLimit,
    CavityEmpty,
    BounceGuard,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::TimeLimit => "time-limit",
            StopReason::CavityEmpty => "cavity-empty",
            StopReason::BounceGuard => "bounce-guard",
        })
    }
}

/// Sampled history of one run. Times are in `ħ/V_b`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub cavity_population: Vec<f64>,
    pub moments: Vec<PacketMoments>,
    #[serde(skip)]
    pub densities: Vec<Vec<f64>>,
    pub stop_reason: Option<StopReason>,
    pub steps: usize,
    pub dt: f64,
    /// Probability removed by the outflow ramps `(left, right)`.
    #[serde(default)]
    pub outflow: (f64, f64),
}

impl EvolutionRecord {
    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn times_si(&self, scales: &Scales) -> Vec<f64> {
        self.times.iter().map(|t| scales.time_to_si(*t)).collect()
    }

    /// CSV `t_s,mean_z_m,mean_p_kg_m_s,delta_z_m,delta_p_kg_m_s,p_cav`.
    pub fn write_moments_csv<W: Write>(&self, scales: &Scales, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_s,mean_z_m,mean_p_kg_m_s,delta_z_m,delta_p_kg_m_s,p_cav")?;
        for (i, m) in self.moments.iter().enumerate() {
            let s = m.to_si(scales);
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                scales.time_to_si(self.times[i]),
                s.mean_position_m,
                s.mean_momentum_kg_m_s,
                s.delta_z_m,
                s.delta_p_kg_m_s,
                self.cavity_population.get(i).copied().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }

    /// Binary stream of `(f64 time_s, n × f64 density_1/m)` records, little endian.
    pub fn write_snapshots<W: Write>(&self, scales: &Scales, mut out: W) -> std::io::Result<()> {
        for (t, d) in self.times.iter().zip(&self.densities) {
            out.write_all(&scales.time_to_si(*t).to_le_bytes())?;
            for v in d {
                out.write_all(&(v / scales.length).to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Reads back [`EvolutionRecord::write_snapshots`] output for `n_points` samples.
pub fn read_snapshots(bytes: &[u8], n_points: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let rec = 8 * (n_points + 1);
    if bytes.len() % rec != 0 {
        return Err(Error::InvalidParameter(format!("snapshot stream length {} is not a multiple of {rec}", bytes.len())));
    }
    let val = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    Ok(bytes
        .chunks_exact(rec)
        .map(|r| {
            let mut it = r.chunks_exact(8).map(val);
            let t = it.next().expect("time");
            (t, it.collect())
        })
        .collect())
}

/// Time-step rule: kinetic phase `β k² dt` at the relevant momentum and
/// potential phase `max|V_barriers| dt` are bounded, then divided by `safety`.
/// Linear terms are excluded from the potential phase since they commute
/// exactly into a momentum shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtPolicy {
    pub kinetic_phase: f64,
    pub potential_phase: f64,
    pub safety: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy { kinetic_phase: 0.5, potential_phase: 0.1, safety: 4.0 }
    }
}

impl DtPolicy {
    pub fn dt(&self, stiffness: f64, k_relevant: f64, potential: &PotentialField) -> f64 {
        let kin = self.kinetic_phase / (stiffness * k_relevant * k_relevant).max(1e-300);
        let vmax = potential
            .without_gravity()
            .samples()
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(1e-300);
        kin.min(self.potential_phase / vmax) / self.safety
    }
}

/// Wavenumber bounding the packet's support where it meets the barriers: the
/// larger of the launch and cavity-center mean wavenumbers, plus `6Δk`.
pub fn relevant_wavenumber(model: &Reduced, initial: &PacketMoments) -> f64 {
    let k0 = initial.mean_wavenumber;
    let e_center = model.kinetic(k0) + model.tilt * initial.mean_position;
    let k_center = model.wavenumber(e_center.max(0.0));
    k0.abs().max(k_center) + 6.0 * initial.width_wavenumber
}

/// Reusable operator set for one potential, interaction and time step.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: Arc<Grid>,
    potential: Vec<f64>,
    interaction: f64,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
    linear_phase: Vec<Complex64>,
}

impl SplitStep {
    /// `interaction` is `γ/(V_b σ_b)`; zero gives the linear equation.
    pub fn new(potential: &PotentialField, stiffness: f64, interaction: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let grid = potential.grid().clone();
        let inv_n = 1.0 / grid.len() as f64;
        let k = grid.native_wavenumbers();
        let half_kinetic = k.iter().map(|k| Complex64::from_polar(inv_n, -stiffness * k * k * dt / 2.0)).collect();
        let full_kinetic = k.iter().map(|k| Complex64::from_polar(inv_n, -stiffness * k * k * dt)).collect();
        let linear_phase = potential.samples().iter().map(|v| Complex64::from_polar(1.0, -v * dt)).collect();
        Ok(SplitStep {
            grid,
            potential: potential.samples().to_vec(),
            interaction,
            dt,
            half_kinetic,
            full_kinetic,
            linear_phase,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Same operators with a different mean-field coupling.
    pub fn with_interaction(mut self, interaction: f64) -> Self {
        self.interaction = interaction;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    fn kinetic(&self, psi: &mut [Complex64], phase: &[Complex64]) {
        self.grid.fft_forward(psi);
        psi.iter_mut().zip(phase).for_each(|(a, p)| *a *= p);
        self.grid.fft_inverse(psi);
    }

    fn potential(&self, psi: &mut [Complex64]) {
        if self.interaction == 0.0 {
            psi.iter_mut().zip(&self.linear_phase).for_each(|(a, p)| *a *= p);
        } else {
            let (g, dt) = (self.interaction, self.dt);
            psi.iter_mut()
                .zip(&self.potential)
                .for_each(|(a, v)| *a *= Complex64::from_polar(1.0, -(v + g * a.norm_sqr()) * dt));
        }
    }

    /// `n` full steps with merged interior half steps.
    pub fn advance(&self, psi: &mut [Complex64], n: usize) {
        if n == 0 {
            return;
        }
        self.kinetic(psi, &self.half_kinetic);
        for i in 0..n {
            self.potential(psi);
            let last = i + 1 == n;
            self.kinetic(psi, if last { &self.half_kinetic } else { &self.full_kinetic });
        }
    }

    /// `⟨H⟩` including the mean-field energy `γ/2 ∫|ψ|⁴`.
    pub fn energy(&self, psi: &WaveFunction, stiffness: f64) -> f64 {
        let pos = position(psi);
        let mom = pos.to_momentum();
        let dk = self.grid.dk();
        let kin: f64 =
            mom.grid().wavenumbers().iter().zip(mom.density()).map(|(k, d)| stiffness * k * k * d).sum::<f64>() * dk;
        let dz = self.grid.dz();
        let pot: f64 = pos
            .density()
            .iter()
            .zip(&self.potential)
            .map(|(d, v)| d * v + 0.5 * self.interaction * d * d)
            .sum::<f64>()
            * dz;
        kin + pot
    }
}

fn position(psi: &WaveFunction) -> WaveFunction {
    match psi.representation() {
        Representation::Position => psi.clone(),
        Representation::Momentum => psi.to_position(),
    }
}

fn edge_density(psi: &[Complex64]) -> f64 {
    psi[0].norm_sqr().max(psi[psi.len() - 1].norm_sqr())
}

/// What to record at each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Sampling {
    /// Steps between samples; 0 records only the endpoints.
    pub stride: usize,
    pub moments: bool,
    pub densities: bool,
}

struct Recorder {
    sampling: Sampling,
    cavity: (f64, f64),
    record: EvolutionRecord,
}

impl Recorder {
    fn sample(&mut self, t: f64, psi: &WaveFunction) {
        self.record.times.push(t);
        self.record.cavity_population.push(psi.probability_between(self.cavity.0, self.cavity.1));
        if self.sampling.moments {
            self.record.moments.push(moments(psi));
        }
        if self.sampling.densities {
            self.record.densities.push(psi.density());
        }
    }
}

fn check_start(psi0: &WaveFunction, grid: &Arc<Grid>) -> Result<WaveFunction> {
    if psi0.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let psi = position(psi0);
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("initial state must be normalized, norm = {norm}")));
    }
    Ok(psi)
}

/// Evolves `psi0` to `t_end` (in `ħ/V_b`). The step count is `⌈t_end/dt⌉` and
/// the step is shrunk to land exactly on `t_end`.
pub fn evolve(
    psi0: &WaveFunction,
    potential: &PotentialField,
    model: &Reduced,
    dt: f64,
    t_end: f64,
    interaction: f64,
    sampling: Sampling,
) -> Result<(WaveFunction, EvolutionRecord)> {
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be positive, got {t_end}")));
    }
    let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let ops = SplitStep::new(potential, model.stiffness, interaction, t_end / n_steps as f64)?;
    let mut psi = check_start(psi0, potential.grid())?;
    let mut rec = Recorder { sampling, cavity: model.barriers(), record: EvolutionRecord::default() };
    rec.record.dt = ops.dt();
    rec.sample(0.0, &psi);
    let chunk = if sampling.stride == 0 { n_steps } else { sampling.stride };
    let mut done = 0;
    while done < n_steps {
        let n = chunk.min(n_steps - done);
        ops.advance(psi.amplitudes_mut(), n);
        done += n;
        let t = done as f64 * ops.dt();
        let edge = edge_density(psi.amplitudes());
        if edge > EDGE_DENSITY_LIMIT {
            return Err(Error::BoundaryReached { time: t, density: edge });
        }
        rec.sample(t, &psi);
    }
    rec.record.steps = n_steps;
    rec.record.stop_reason = Some(StopReason::TimeLimit);
    Ok((psi, rec.record))
}

/// Stop rules for [`evolve_until_scattered`]. Times in `ħ/V_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRules {
    pub t_cap: f64,
    pub bounce_time: Option<f64>,
    pub cavity_threshold: f64,
    pub barrier_density: f64,
    /// Steps between rule checks.
    pub check_every: usize,
    /// Width of the outflow ramps at both grid ends; `None` keeps the grid closed.
    #[serde(default)]
    pub outflow_ramp: Option<f64>,
}

impl StopRules {
    pub fn new(t_cap: f64, bounce_time: Option<f64>) -> Self {
        StopRules { t_cap, bounce_time, cavity_threshold: 0.01, barrier_density: 1e-6, check_every: 20, outflow_ramp: None }
    }

    /// Fixed-duration run: no cavity or bounce stop.
    pub fn fixed_time(t_end: f64) -> Self {
        StopRules { cavity_threshold: 0.0, ..StopRules::new(t_end, None) }
    }

    pub fn with_outflow(self, ramp: f64) -> Self {
        StopRules { outflow_ramp: Some(ramp), ..self }
    }
}

/// Smooth mask that takes outgoing probability off the grid ends. Removed
/// probability is tallied per side, so the left/right projections stay exact
/// as long as nothing would have come back from beyond the ramp start.
#[derive(Debug, Clone)]
pub struct OutflowMask {
    mask: Vec<f64>,
    split: usize,
    dz: f64,
}

impl OutflowMask {
    pub fn new(grid: &Grid, ramp: f64) -> Result<Self> {
        let span = grid.z_max() - grid.z_min();
        if !(ramp > 0.0) || 2.0 * ramp >= span {
            return Err(Error::InvalidParameter(format!("outflow ramp {ramp} does not fit the grid")));
        }
        let (a, b) = (grid.z_min() + ramp, grid.z_max() - ramp);
        let mask = (0..grid.len())
            .map(|i| {
                let z = grid.z(i);
                let depth = if z < a { (a - z) / ramp } else if z > b { (z - b) / ramp } else { 0.0 };
                // cos^(1/8) profile: gentle onset, zero at the edge
                (0.5 * std::f64::consts::PI * depth.min(1.0)).cos().powf(0.125)
            })
            .collect();
        Ok(OutflowMask { mask, split: grid.len() / 2, dz: grid.dz() })
    }

    /// Applies the mask and returns the removed probability `(left, right)`.
    pub fn apply(&self, psi: &mut [Complex64]) -> (f64, f64) {
        let mut removed = (0.0, 0.0);
        for (i, (a, m)) in psi.iter_mut().zip(&self.mask).enumerate() {
            if *m < 1.0 {
                let before = a.norm_sqr();
                *a *= *m;
                let lost = (before - a.norm_sqr()) * self.dz;
                if i < self.split {
                    removed.0 += lost;
                } else {
                    removed.1 += lost;
                }
            }
        }
        removed
    }
}

/// Largest density within 3σ_b of either barrier center.
pub fn barrier_density(psi: &WaveFunction, barriers: (f64, f64)) -> f64 {
    let grid = psi.grid();
    psi.amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let z = grid.z(*i);
            (z - barriers.0).abs() <= 3.0 || (z - barriers.1).abs() <= 3.0
        })
        .map(|(_, a)| a.norm_sqr())
        .fold(0.0, f64::max)
}

/// Classical return time to the exit barrier for a packet launched at
/// `model.packet_center` with wavenumber `k0` (`H = βk² + tilt·z`). For
/// positive tilt the transmitted part falls back onto `z_+`; for negative
/// tilt the reflected part falls back onto `z_−`. `None` at zero tilt or if
/// the center never reaches the exit barrier.
pub fn bounce_time(model: &Reduced, k0: f64) -> Option<f64> {
    let g = model.tilt;
    if g == 0.0 {
        return None;
    }
    let (zm, zp) = model.barriers();
    let z0 = model.packet_center;
    let (target, v0) = (if g > 0.0 { zp } else { zm }, 2.0 * model.stiffness * k0);
    // z(t) = z0 + v0 t − β g t²
    let a = model.stiffness * g;
    let disc = v0 * v0 - 4.0 * a * (target - z0);
    if disc < 0.0 {
        return None;
    }
    let t_hit = (v0 - disc.sqrt()) / (2.0 * a);
    if !(t_hit > 0.0) {
        return None;
    }
    let k_hit = k0 - g * t_hit;
    Some(t_hit + 2.0 * k_hit.abs() / g.abs())
}

/// Runs until the earliest stop rule fires: cavity empty with the barrier
/// regions clear, the bounce guard, or the cap. Hitting the cap with cavity
/// population above threshold returns [`Error::NotConverged`] only if
/// `strict`; otherwise the record carries [`StopReason::TimeLimit`].
pub fn evolve_until_scattered(
    psi0: &WaveFunction,
    potential: &PotentialField,
    model: &Reduced,
    dt: f64,
    interaction: f64,
    rules: StopRules,
    sampling: Sampling,
    strict: bool,
) -> Result<(WaveFunction, EvolutionRecord)> {
    let ops = SplitStep::new(potential, model.stiffness, interaction, dt)?;
    let mut psi = check_start(psi0, potential.grid())?;
    let cavity = model.barriers();
    let mut rec = Recorder { sampling, cavity, record: EvolutionRecord::default() };
    rec.record.dt = dt;
    rec.sample(0.0, &psi);
    let mask = rules.outflow_ramp.map(|r| OutflowMask::new(potential.grid(), r)).transpose()?;
    let check = rules.check_every.max(1);
    let limit = rules.bounce_time.map_or(rules.t_cap, |b| b.min(rules.t_cap));
    let n_max = (limit / dt).floor() as usize;
    let mut done = 0;
    let mut since_sample = 0;
    let reason = loop {
        if done >= n_max {
            break if rules.bounce_time.is_some_and(|b| b < rules.t_cap) {
                StopReason::BounceGuard
            } else {
                StopReason::TimeLimit
            };
        }
        let n = check.min(n_max - done);
        ops.advance(psi.amplitudes_mut(), n);
        done += n;
        since_sample += n;
        let t = done as f64 * dt;
        if let Some(m) = &mask {
            let (l, r) = m.apply(psi.amplitudes_mut());
            rec.record.outflow.0 += l;
            rec.record.outflow.1 += r;
        }
        let edge = edge_density(psi.amplitudes());
        if mask.is_none() && edge > EDGE_DENSITY_LIMIT {
            return Err(Error::BoundaryReached { time: t, density: edge });
        }
        let p_cav = psi.probability_between(cavity.0, cavity.1);
        if rules.cavity_threshold > 0.0 && p_cav < rules.cavity_threshold && barrier_density(&psi, cavity) < rules.barrier_density {
            break StopReason::CavityEmpty;
        }
        if sampling.stride > 0 && since_sample >= sampling.stride {
            rec.sample(t, &psi);
            since_sample = 0;
        }
    };
    let t = done as f64 * dt;
    if rec.record.times.last() != Some(&t) {
        rec.sample(t, &psi);
    }
    rec.record.steps = done;
    rec.record.stop_reason = Some(reason);
    if strict && reason == StopReason::TimeLimit {
        let p = *rec.record.cavity_population.last().expect("sampled");
        if p >= rules.cavity_threshold {
            return Err(Error::NotConverged { time: t, cavity_population: p });
        }
    }
    Ok((psi, rec.record))
}

/// Density on a `(t, z)` lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carpet {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// `density[t][z]`.
    pub density: Vec<Vec<f64>>,
}

/// Density every `stride` steps, restricted to `window` and thinned to every
/// `z_stride`-th grid point.
pub fn carpet(
    psi0: &WaveFunction,
    potential: &PotentialField,
    model: &Reduced,
    dt: f64,
    t_end: f64,
    stride: usize,
    window: (f64, f64),
    z_stride: usize,
) -> Result<Carpet> {
    let sampling = Sampling { stride: stride.max(1), moments: false, densities: true };
    let (_, rec) = evolve(psi0, potential, model, dt, t_end, model.interaction, sampling)?;
    let grid = potential.grid();
    let idx: Vec<usize> = (0..grid.len())
        .step_by(z_stride.max(1))
        .filter(|i| (window.0..=window.1).contains(&grid.z(*i)))
        .collect();
    Ok(Carpet {
        times: rec.times,
        positions: idx.iter().map(|i| grid.z(*i)).collect(),
        density: rec.densities.iter().map(|d| idx.iter().map(|i| d[*i]).collect()).collect(),
    })
}

/// Potential for free motion plus a uniform slope, for deformation checks.
pub fn linear_only(model: &Reduced, grid: Arc<Grid>) -> PotentialField {
    PotentialField::from_terms(grid, vec![PotentialTerm::Linear { slope: model.tilt, origin: 0.0 }])
}
