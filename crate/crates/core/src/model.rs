//! Physical parameters, unit scales, grids and the wave-function container.
//!
//! All solvers work in reduced units: lengths in barrier widths `σ_b`,
//! energies in barrier heights `V_b`, times in `ħ/V_b`, and momenta as
//! wavenumbers in `1/σ_b` (so `ħ = 1`). The kinetic energy of a wavenumber
//! `κ` is then `β κ²` with the stiffness `β = ħ²/(2 m σ_b² V_b)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (CODATA 2018), J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Mass of a rubidium-87 atom, kg.
pub const RB87_MASS_KG: f64 = 1.443_160_9e-25;

/// Recoil velocity of the rubidium-87 D2 line, m/s.
pub const RB87_RECOIL_VELOCITY: f64 = 5.8845e-3;

/// Barrier height reproducing the seven sub-barrier resonances and the Bragg
/// Rabi frequencies of the reference cavity (σ_b = 1 µm, d = 15 µm).
pub const CALIBRATED_BARRIER_HEIGHT_J: f64 = 3.7813e-32;

/// Barrier height quoted alongside the reference cavity. Inconsistent with its
/// resonance count; kept only as an explicit override.
pub const QUOTED_BARRIER_HEIGHT_J: f64 = 1.42e-25;

/// Physical model in SI units. Field names are the JSON wire format; missing
/// fields take the reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub mass_kg: f64,
    pub gravity_m_s2: f64,
    #[serde(rename = "barrier_height_J")]
    pub barrier_height_j: f64,
    pub barrier_width_m: f64,
    pub cavity_length_m: f64,
    /// 1D mean-field coupling γ in J·m (γ|ψ|² is an energy when |ψ|² is in 1/m).
    #[serde(rename = "interaction_J_m")]
    pub interaction_j_m: f64,
    pub packet_width_m: f64,
    pub packet_center_m: f64,
    pub packet_momentum_kg_m_s: f64,
    pub recoil_velocity_m_s: f64,
    pub bragg_wavevector_1_m: f64,
}

impl ModelParams {
    /// Reference cavity: ⁸⁷Rb, σ_b = 1 µm, d = 15 µm, Δz = 12 µm, calibrated V_b,
    /// packet placed at the default launch position, no kick, no gravity.
    pub fn reference() -> Self {
        let mut p = ModelParams {
            mass_kg: RB87_MASS_KG,
            gravity_m_s2: 0.0,
            barrier_height_j: CALIBRATED_BARRIER_HEIGHT_J,
            barrier_width_m: 1e-6,
            cavity_length_m: 15e-6,
            interaction_j_m: 0.0,
            packet_width_m: 12e-6,
            packet_center_m: 0.0,
            packet_momentum_kg_m_s: 0.0,
            recoil_velocity_m_s: RB87_RECOIL_VELOCITY,
            bragg_wavevector_1_m: 2.0 * RB87_MASS_KG * RB87_RECOIL_VELOCITY / HBAR,
        };
        p.packet_center_m = p.default_packet_center();
        p
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass_kg", self.mass_kg),
            ("barrier_height_J", self.barrier_height_j),
            ("barrier_width_m", self.barrier_width_m),
            ("packet_width_m", self.packet_width_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.cavity_length_m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cavity_length_m must be non-negative, got {}",
                self.cavity_length_m
            )));
        }
        let finite = [
            self.gravity_m_s2,
            self.interaction_j_m,
            self.packet_center_m,
            self.packet_momentum_kg_m_s,
            self.recoil_velocity_m_s,
            self.bragg_wavevector_1_m,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        Ok(())
    }

    /// Barrier centers `(z_−, z_+) = ∓(3σ_b + d/2)`.
    pub fn barrier_positions(&self) -> (f64, f64) {
        let zp = 3.0 * self.barrier_width_m + 0.5 * self.cavity_length_m;
        (-zp, zp)
    }

    /// Launch position outside the cavity, `z₀ = −3Δz − 6σ_b − d/2`.
    pub fn default_packet_center(&self) -> f64 {
        -3.0 * self.packet_width_m - 6.0 * self.barrier_width_m - 0.5 * self.cavity_length_m
    }

    pub fn scales(&self) -> Result<Scales> {
        make_scales(self)
    }

    pub fn reduced(&self) -> Result<Reduced> {
        let s = make_scales(self)?;
        Ok(Reduced {
            stiffness: s.stiffness,
            barrier_center: self.barrier_positions().1 / s.length,
            tilt: self.mass_kg * self.gravity_m_s2 * s.length / s.energy,
            interaction: self.interaction_j_m / (s.energy * s.length),
            packet_width: self.packet_width_m / s.length,
            packet_center: self.packet_center_m / s.length,
            packet_wavenumber: self.packet_momentum_kg_m_s * s.length / HBAR,
        })
    }

    /// Momentum that gives kinetic energy `energy_j` at the cavity center for a
    /// packet launched at `packet_center_m` in the tilted potential. `None` if
    /// the launch energy would be negative.
    pub fn launch_momentum_for_center_energy(&self, energy_j: f64) -> Option<f64> {
        let launch = energy_j - self.mass_kg * self.gravity_m_s2 * self.packet_center_m;
        (launch > 0.0).then(|| (2.0 * self.mass_kg * launch).sqrt())
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Unit system tied to the barrier: `L₀ = σ_b`, `E₀ = V_b`, `T₀ = ħ/E₀`,
/// `P₀ = √(2 m E₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub length: f64,
    pub energy: f64,
    pub time: f64,
    pub momentum: f64,
    /// `β = ħ²/(2 m σ_b² V_b)`.
    pub stiffness: f64,
}

pub fn make_scales(params: &ModelParams) -> Result<Scales> {
    params.validate()?;
    let (m, vb, sb) = (params.mass_kg, params.barrier_height_j, params.barrier_width_m);
    Ok(Scales {
        length: sb,
        energy: vb,
        time: HBAR / vb,
        momentum: (2.0 * m * vb).sqrt(),
        stiffness: HBAR * HBAR / (2.0 * m * sb * sb * vb),
    })
}

impl Scales {
    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length
    }
    pub fn length_from_si(&self, z: f64) -> f64 {
        z / self.length
    }
    pub fn energy_to_si(&self, e: f64) -> f64 {
        e * self.energy
    }
    pub fn energy_from_si(&self, e: f64) -> f64 {
        e / self.energy
    }
    pub fn time_to_si(&self, t: f64) -> f64 {
        t * self.time
    }
    pub fn time_from_si(&self, t: f64) -> f64 {
        t / self.time
    }
    /// Wavenumber (1/σ_b) to momentum in kg·m/s.
    pub fn wavenumber_to_si(&self, k: f64) -> f64 {
        k * HBAR / self.length
    }
    pub fn wavenumber_from_si(&self, p: f64) -> f64 {
        p * self.length / HBAR
    }
    /// Momentum in units of `P₀ = √(2 m V_b)` for a wavenumber in 1/σ_b.
    pub fn wavenumber_to_momentum_unit(&self, k: f64) -> f64 {
        k * self.stiffness.sqrt()
    }
}

/// Model parameters in reduced units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduced {
    pub stiffness: f64,
    /// `z_+ / σ_b`; the left barrier sits at the negative of this.
    pub barrier_center: f64,
    /// `m g σ_b / V_b`, the potential slope per barrier width.
    pub tilt: f64,
    /// `γ / (V_b σ_b)`.
    pub interaction: f64,
    pub packet_width: f64,
    pub packet_center: f64,
    pub packet_wavenumber: f64,
}

impl Reduced {
    pub fn barriers(&self) -> (f64, f64) {
        (-self.barrier_center, self.barrier_center)
    }

    pub fn kinetic(&self, k: f64) -> f64 {
        self.stiffness * k * k
    }

    /// Wavenumber with kinetic energy `e`.
    pub fn wavenumber(&self, e: f64) -> f64 {
        (e / self.stiffness).sqrt()
    }

    /// Launch wavenumber so that the kinetic energy at the cavity center is `e`.
    pub fn launch_wavenumber(&self, e: f64) -> Option<f64> {
        let launch = e - self.tilt * self.packet_center;
        (launch > 0.0).then(|| self.wavenumber(launch))
    }
}

#[derive(Clone)]
struct FftPair {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid `z_i = z_min + i dz`, `dz = (z_max − z_min)/n`, and its
/// conjugate wavenumber grid.
///
/// Public accessors return wavenumbers in ascending order; [`Grid::native_index`]
/// maps an ascending index to the FFT's native layout.
#[derive(Clone)]
pub struct Grid {
    z_min: f64,
    z_max: f64,
    n: usize,
    dz: f64,
    plans: OnceLock<FftPair>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("z_min", &self.z_min)
            .field("z_max", &self.z_max)
            .field("n_points", &self.n)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.z_min == other.z_min && self.z_max == other.z_max && self.n == other.n
    }
}

pub fn build_grid(z_min: f64, z_max: f64, n_points: usize) -> Result<Grid> {
    Grid::new(z_min, z_max, n_points)
}

impl Grid {
    pub const MIN_POINTS: usize = 1 << 8;

    pub fn new(z_min: f64, z_max: f64, n_points: usize) -> Result<Self> {
        if !(z_max > z_min) || !z_min.is_finite() || !z_max.is_finite() {
            return Err(Error::InvalidParameter(format!("grid bounds [{z_min}, {z_max}]")));
        }
        if !n_points.is_power_of_two() || n_points < Self::MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "n_points must be a power of two >= {}, got {n_points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Grid { z_min, z_max, n: n_points, dz: (z_max - z_min) / n_points as f64, plans: OnceLock::new() })
    }

    /// Symmetric grid `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn z_min(&self) -> f64 {
        self.z_min
    }
    pub fn z_max(&self) -> f64 {
        self.z_max
    }
    pub fn dz(&self) -> f64 {
        self.dz
    }
    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.z_max - self.z_min)
    }
    pub fn k_max(&self) -> f64 {
        PI / self.dz
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z_min + i as f64 * self.dz
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.z(i)).collect()
    }

    /// Ascending wavenumbers `k_j = (j − n/2) dk`.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let half = (self.n / 2) as f64;
        (0..self.n).map(|j| (j as f64 - half) * self.dk()).collect()
    }

    /// Wavenumbers in the FFT's native order.
    pub fn native_wavenumbers(&self) -> Vec<f64> {
        let n = self.n as isize;
        (0..n).map(|m| if m < n / 2 { m } else { m - n } as f64 * self.dk()).collect()
    }

    /// Native FFT index of ascending index `j`.
    pub fn native_index(&self, j: usize) -> usize {
        (j + self.n / 2) % self.n
    }

    /// Index of the first grid point with `z >= z`.
    pub fn index_at_or_after(&self, z: f64) -> usize {
        let x = ((z - self.z_min) / self.dz).ceil();
        x.clamp(0.0, self.n as f64) as usize
    }

    fn plans(&self) -> &FftPair {
        self.plans.get_or_init(|| {
            let mut planner = FftPlanner::new();
            FftPair { forward: planner.plan_fft_forward(self.n), inverse: planner.plan_fft_inverse(self.n) }
        })
    }

    /// In-place unnormalized forward FFT.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.plans().forward.process(data);
    }

    /// In-place unnormalized inverse FFT.
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.plans().inverse.process(data);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Position,
    Momentum,
}

/// Complex amplitudes on a grid. In momentum representation the samples are
/// ordered by ascending wavenumber and normalized as `Σ|φ|² dk = 1`.
#[derive(Debug, Clone)]
pub struct WaveFunction {
    grid: Arc<Grid>,
    amplitudes: Vec<Complex64>,
    representation: Representation,
}

impl WaveFunction {
    pub fn new(grid: Arc<Grid>, amplitudes: Vec<Complex64>, representation: Representation) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(WaveFunction { grid, amplitudes, representation })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Self {
        let amplitudes = (0..grid.len()).map(|i| f(grid.z(i))).collect();
        WaveFunction { grid, amplitudes, representation: Representation::Position }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }
    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }
    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }
    pub fn representation(&self) -> Representation {
        self.representation
    }

    fn measure(&self) -> f64 {
        match self.representation {
            Representation::Position => self.grid.dz(),
            Representation::Momentum => self.grid.dk(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.measure()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero wave function".into()));
        }
        let s = 1.0 / n.sqrt();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `φ(k_j) = dz/√(2π) Σ_i ψ(z_i) e^{−i k_j z_i}`, ascending `k_j`.
    pub fn to_momentum(&self) -> WaveFunction {
        match self.representation {
            Representation::Momentum => self.clone(),
            Representation::Position => {
                let g = &self.grid;
                let mut buf = self.amplitudes.clone();
                g.fft_forward(&mut buf);
                let pref = g.dz() / (2.0 * PI).sqrt();
                let native_k = g.native_wavenumbers();
                let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
                for (j, slot) in out.iter_mut().enumerate() {
                    let m = g.native_index(j);
                    *slot = buf[m] * Complex64::from_polar(pref, -native_k[m] * g.z_min());
                }
                WaveFunction { grid: self.grid.clone(), amplitudes: out, representation: Representation::Momentum }
            }
        }
    }

    /// Inverse of [`WaveFunction::to_momentum`].
    pub fn to_position(&self) -> WaveFunction {
        match self.representation {
            Representation::Position => self.clone(),
            Representation::Momentum => {
                let g = &self.grid;
                let native_k = g.native_wavenumbers();
                let mut buf = vec![Complex64::new(0.0, 0.0); g.len()];
                let pref = g.dk() / (2.0 * PI).sqrt();
                for (j, a) in self.amplitudes.iter().enumerate() {
                    let m = g.native_index(j);
                    buf[m] = a * Complex64::from_polar(pref, native_k[m] * g.z_min());
                }
                g.fft_inverse(&mut buf);
                WaveFunction { grid: self.grid.clone(), amplitudes: buf, representation: Representation::Position }
            }
        }
    }

    /// Probability in `[a, b]` (position representation), by grid-point sum.
    pub fn probability_between(&self, a: f64, b: f64) -> f64 {
        let g = &self.grid;
        let (i0, i1) = (g.index_at_or_after(a), g.index_at_or_after(b));
        self.amplitudes[i0..i1.max(i0)].iter().map(|c| c.norm_sqr()).sum::<f64>() * g.dz()
    }
}
