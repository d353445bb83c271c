//! Transfer-matrix transmission of the untilted cavity.
//!
//! Inside a constant step the state `(ψ, ψ')` is carried by the real matrix
//! `[[cos κw, sin κw/κ], [−κ sin κw, cos κw]]` with `κ² = (E − V)/β`, an entire
//! function of `κ²`, so the above-, below- and at-barrier cases share one formula.
//! Amplitude matrices act on `(A, B)` in `A e^{ikz} + B e^{−ikz}` with global
//! phase reference, so free space is the identity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Reduced, Representation, WaveFunction};
use crate::potentials::{cavity_terms, evaluate_terms, PotentialTerm};

/// Step length of the default partition, in σ_b.
pub const DEFAULT_STEP: f64 = 0.27;
/// Doubling limit for [`transmission_spectrum`].
pub const MAX_DOUBLINGS: usize = 20;

type Real2 = [[f64; 2]; 2];
type Complex2 = [[Complex64; 2]; 2];

fn mul_real(a: &Real2, b: &Real2) -> Real2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn mul_complex(a: &Complex2, b: &Complex2) -> Complex2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// `(ψ, ψ')` propagator across a constant region of width `w` with `κ² = q`.
fn state_step(q: f64, w: f64) -> Real2 {
    let x = q * w * w;
    let (c, s_over_k, k_s) = if x.abs() < 1e-8 {
        // series through the turning point
        (1.0 - x / 2.0 + x * x / 24.0, w * (1.0 - x / 6.0 + x * x / 120.0), -q * w * (1.0 - x / 6.0))
    } else if q > 0.0 {
        let k = q.sqrt();
        let (s, c) = (k * w).sin_cos();
        (c, s / k, -k * s)
    } else {
        let k = (-q).sqrt();
        let (s, c) = ((k * w).sinh(), (k * w).cosh());
        (c, s / k, k * s)
    };
    [[c, s_over_k], [k_s, c]]
}

/// Amplitude transfer matrix with its energy and partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m: Complex2,
    /// Energy in units of `V_b`.
    pub energy: f64,
    pub n_steps: usize,
    pub window: (f64, f64),
}

impl TransferMatrix {
    fn from_state(state: &Real2, energy: f64, stiffness: f64, za: f64, zb: f64, n_steps: usize) -> Self {
        let k = (energy / stiffness).sqrt();
        let i = Complex64::i();
        let wa = [
            [Complex64::from_polar(1.0, k * za), Complex64::from_polar(1.0, -k * za)],
            [i * k * Complex64::from_polar(1.0, k * za), -i * k * Complex64::from_polar(1.0, -k * za)],
        ];
        let eb = Complex64::from_polar(1.0, -k * zb);
        let wb_inv = [[eb / 2.0, eb / (2.0 * i * k)], [eb.conj() / 2.0, -eb.conj() / (2.0 * i * k)]];
        let s = [
            [Complex64::new(state[0][0], 0.0), Complex64::new(state[0][1], 0.0)],
            [Complex64::new(state[1][0], 0.0), Complex64::new(state[1][1], 0.0)],
        ];
        let m = mul_complex(&wb_inv, &mul_complex(&s, &wa));
        TransferMatrix { m, energy, n_steps, window: (za, zb) }
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Transmission amplitude for incidence from the left.
    pub fn tau(&self) -> Complex64 {
        self.m[1][1].inv()
    }

    /// Reflection amplitude for incidence from the left.
    pub fn rho(&self) -> Complex64 {
        -self.m[1][0] / self.m[1][1]
    }

    pub fn transmission(&self) -> f64 {
        self.tau().norm_sqr()
    }

    pub fn reflection(&self) -> f64 {
        self.rho().norm_sqr()
    }

    /// `self` after `first` (windows must abut).
    pub fn after(&self, first: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m: mul_complex(&self.m, &first.m),
            energy: self.energy,
            n_steps: self.n_steps + first.n_steps,
            window: (first.window.0, self.window.1),
        }
    }
}

fn check_energy(energy: f64) -> Result<()> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::InvalidParameter(format!("energy must be positive, got {energy}")));
    }
    Ok(())
}

/// Single constant step `V` of width `w` starting at `z = 0`, embedded in free space.
pub fn step_matrix(energy: f64, v_step: f64, width: f64, stiffness: f64) -> Result<TransferMatrix> {
    check_energy(energy)?;
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("step width must be positive, got {width}")));
    }
    let s = state_step((energy - v_step) / stiffness, width);
    Ok(TransferMatrix::from_state(&s, energy, stiffness, 0.0, width, 1))
}

/// Staircase of `terms` over `[za, zb]`, `n_steps` equal intervals sampled at midpoints.
pub fn window_matrix(
    energy: f64,
    terms: &[PotentialTerm],
    stiffness: f64,
    window: (f64, f64),
    n_steps: usize,
) -> Result<TransferMatrix> {
    check_energy(energy)?;
    if n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    let (za, zb) = window;
    let h = (zb - za) / n_steps as f64;
    let mut total: Real2 = [[1.0, 0.0], [0.0, 1.0]];
    for j in 0..n_steps {
        let v = evaluate_terms(terms, za + (j as f64 + 0.5) * h);
        total = mul_real(&state_step((energy - v) / stiffness, h), &total);
    }
    Ok(TransferMatrix::from_state(&total, energy, stiffness, za, zb, n_steps))
}

/// Default window `[z_− − 6σ_b, z_+ + 6σ_b]`.
pub fn cavity_window(model: &Reduced) -> (f64, f64) {
    let (zm, zp) = model.barriers();
    (zm - 6.0, zp + 6.0)
}

/// Step count giving a step of about [`DEFAULT_STEP`] over the default window.
pub fn default_steps(model: &Reduced) -> usize {
    let (a, b) = cavity_window(model);
    ((b - a) / DEFAULT_STEP).round().max(1.0) as usize
}

fn require_untilted(model: &Reduced) -> Result<()> {
    if model.tilt != 0.0 {
        return Err(Error::GravityNonzero(model.tilt));
    }
    Ok(())
}

/// Double-Gaussian cavity at `energy` (units of `V_b`).
pub fn cavity_matrix(energy: f64, model: &Reduced, n_steps: usize) -> Result<TransferMatrix> {
    require_untilted(model)?;
    window_matrix(energy, &cavity_terms(model), model.stiffness, cavity_window(model), n_steps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSpectrum {
    /// `E/V_b`.
    pub energies: Vec<f64>,
    pub tau_sq: Vec<f64>,
    pub n_steps: usize,
    pub converged: bool,
    pub doublings: usize,
    pub last_change: f64,
    pub tolerance: f64,
}

fn spectrum_at(model: &Reduced, energies: &[f64], n_steps: usize) -> Result<Vec<f64>> {
    energies.par_iter().map(|e| cavity_matrix(*e, model, n_steps).map(|m| m.transmission())).collect()
}

/// `|τ(E)|²`, doubling the step count from the default until the largest change
/// over `energies` drops below `tol`.
pub fn transmission_spectrum(model: &Reduced, energies: &[f64], tol: f64) -> Result<TransmissionSpectrum> {
    require_untilted(model)?;
    let mut n = default_steps(model);
    let mut prev = spectrum_at(model, energies, n)?;
    let mut change = f64::INFINITY;
    for doubling in 1..=MAX_DOUBLINGS {
        n *= 2;
        let next = spectrum_at(model, energies, n)?;
        change = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = next;
        if change < tol {
            return Ok(TransmissionSpectrum {
                energies: energies.to_vec(),
                tau_sq: prev,
                n_steps: n,
                converged: true,
                doublings: doubling,
                last_change: change,
                tolerance: tol,
            });
        }
    }
    Err(Error::SpectrumNotConverged { doublings: MAX_DOUBLINGS, change })
}

impl TransmissionSpectrum {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "E_over_Vb,tau_sq")?;
        for (e, t) in self.energies.iter().zip(&self.tau_sq) {
            writeln!(out, "{e:.12e},{t:.12e}")?;
        }
        Ok(())
    }

    /// Convergence metadata for the JSON sidecar.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "n_steps": self.n_steps,
            "converged": self.converged,
            "doublings": self.doublings,
            "last_change": self.last_change,
            "tolerance": self.tolerance,
            "n_energies": self.energies.len(),
        })
    }
}

/// Relative weight below which momentum components are skipped.
const WEIGHT_CUTOFF: f64 = 1e-18;
/// Largest allowed negative-momentum weight.
pub const MAX_NEGATIVE_WEIGHT: f64 = 1e-6;

/// `∫ dk |τ(k)|² |ψ̃(k)|²` with `tau_sq` a function of the wavenumber.
pub fn averaged_transmission_with(tau_sq: impl Fn(f64) -> f64 + Sync, psi: &WaveFunction) -> Result<f64> {
    let phi = match psi.representation() {
        Representation::Momentum => psi.clone(),
        Representation::Position => psi.to_momentum(),
    };
    let grid = phi.grid();
    let dk = grid.dk();
    let k = grid.wavenumbers();
    let dens = phi.density();
    let total: f64 = dens.iter().sum::<f64>() * dk;
    let negative: f64 = k.iter().zip(&dens).filter(|(k, _)| **k < 0.0).map(|(_, d)| d).sum::<f64>() * dk;
    if negative / total > MAX_NEGATIVE_WEIGHT {
        return Err(Error::Applicability(format!("negative-momentum weight {:e}", negative / total)));
    }
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    let t: f64 = k
        .par_iter()
        .zip(dens.par_iter())
        .filter(|(k, d)| **k > 0.0 && **d > WEIGHT_CUTOFF * peak)
        .map(|(k, d)| tau_sq(*k) * d)
        .sum();
    Ok(t * dk / total)
}

/// Momentum-averaged transmission of the untilted cavity for `psi`.
pub fn averaged_transmission(model: &Reduced, n_steps: usize, psi: &WaveFunction) -> Result<f64> {
    if model.tilt != 0.0 {
        return Err(Error::Applicability(format!("momentum averaging needs g = 0, tilt = {}", model.tilt)));
    }
    let terms = cavity_terms(model);
    let window = cavity_window(model);
    averaged_transmission_with(
        |k| {
            window_matrix(model.kinetic(k), &terms, model.stiffness, window, n_steps)
                .map(|m| m.transmission())
                .unwrap_or(0.0)
        },
        psi,
    )
}
