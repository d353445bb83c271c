//! Tilted double-Gaussian cavity and the triangular reference well.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::airy::airy_ai_zero;
use crate::error::{Error, Result};
use crate::model::{Grid, Reduced, Scales, HBAR};

/// Wall height used by grid-based solvers in place of an infinite wall.
pub const WALL_CAP: f64 = 1e3;

/// One analytic component of a potential (reduced units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialTerm {
    /// `slope · (z − origin)`
    Linear { slope: f64, origin: f64 },
    /// `height · exp(−(z − center)² / (2 width²))`
    Gaussian { center: f64, width: f64, height: f64 },
    /// Replaces the total with `cap` for `z <= position`.
    HardWall { position: f64, cap: f64 },
}

impl PotentialTerm {
    fn smooth_value(&self, z: Complex64) -> Complex64 {
        match *self {
            PotentialTerm::Linear { slope, origin } => slope * (z - origin),
            PotentialTerm::Gaussian { center, width, height } => {
                let u = z - center;
                height * (-(u * u) / (2.0 * width * width)).exp()
            }
            PotentialTerm::HardWall { .. } => Complex64::new(0.0, 0.0),
        }
    }
}

/// Sum of terms; walls override.
pub fn evaluate_terms(terms: &[PotentialTerm], z: f64) -> f64 {
    for t in terms {
        if let PotentialTerm::HardWall { position, cap } = *t {
            if z <= position {
                return cap;
            }
        }
    }
    terms.iter().map(|t| t.smooth_value(Complex64::new(z, 0.0)).re).sum()
}

/// Analytic continuation of the smooth terms (walls ignored), used under
/// complex scaling.
pub fn evaluate_terms_complex(terms: &[PotentialTerm], z: Complex64) -> Complex64 {
    terms.iter().map(|t| t.smooth_value(z)).sum()
}

/// Potential samples on a grid together with their analytic description.
/// Samples are in units of `V_b`.
#[derive(Debug, Clone)]
pub struct PotentialField {
    grid: Arc<Grid>,
    samples: Vec<f64>,
    terms: Vec<PotentialTerm>,
}

impl PotentialField {
    pub fn from_terms(grid: Arc<Grid>, terms: Vec<PotentialTerm>) -> Self {
        let samples = (0..grid.len()).map(|i| evaluate_terms(&terms, grid.z(i))).collect();
        PotentialField { grid, samples, terms }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn eval(&self, z: f64) -> f64 {
        evaluate_terms(&self.terms, z)
    }

    /// Samples in joules.
    pub fn samples_si(&self, scales: &Scales) -> Vec<f64> {
        self.samples.iter().map(|v| scales.energy_to_si(*v)).collect()
    }

    /// Copy without the linear term(s).
    pub fn without_gravity(&self) -> Self {
        let terms = self.terms.iter().copied().filter(|t| !matches!(t, PotentialTerm::Linear { .. })).collect();
        Self::from_terms(self.grid.clone(), terms)
    }

    /// Copy with only the linear term(s).
    pub fn gravity_only(&self) -> Self {
        let terms = self.terms.iter().copied().filter(|t| matches!(t, PotentialTerm::Linear { .. })).collect();
        Self::from_terms(self.grid.clone(), terms)
    }

    /// Two-column CSV `z_m,V_J`.
    pub fn write_csv<W: std::io::Write>(&self, scales: &Scales, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z_m,V_J")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{:.12e},{:.12e}", scales.length_to_si(self.grid.z(i)), scales.energy_to_si(*v))?;
        }
        Ok(())
    }
}

/// Terms of `m g z + V_b e^{−(z−z_−)²/2σ_b²} + V_b e^{−(z−z_+)²/2σ_b²}`.
pub fn cavity_terms(model: &Reduced) -> Vec<PotentialTerm> {
    let (zm, zp) = model.barriers();
    vec![
        PotentialTerm::Linear { slope: model.tilt, origin: 0.0 },
        PotentialTerm::Gaussian { center: zm, width: 1.0, height: 1.0 },
        PotentialTerm::Gaussian { center: zp, width: 1.0, height: 1.0 },
    ]
}

pub fn cavity_potential(model: &Reduced, grid: Arc<Grid>) -> PotentialField {
    PotentialField::from_terms(grid, cavity_terms(model))
}

/// Hard wall at `z_wall` with a ramp `|tilt|·(z − z_wall)` beyond it. The wall is
/// the finite cap [`WALL_CAP`].
pub fn triangular_potential(z_wall: f64, tilt: f64, grid: Arc<Grid>) -> Result<PotentialField> {
    if tilt == 0.0 {
        return Err(Error::NoBoundStates);
    }
    let terms = vec![
        PotentialTerm::HardWall { position: z_wall, cap: WALL_CAP },
        PotentialTerm::Linear { slope: tilt.abs(), origin: z_wall },
    ];
    Ok(PotentialField::from_terms(grid, terms))
}

/// Bound-state energies `|a_n| (ħ² m g² / 2)^{1/3}` of a linear ramp against a
/// hard wall, in joules. Uses `|g|`.
pub fn triangular_eigenenergies(gravity: f64, mass: f64, n_levels: usize) -> Result<Vec<f64>> {
    if gravity == 0.0 {
        return Err(Error::NoBoundStates);
    }
    if n_levels == 0 {
        return Err(Error::InvalidParameter("n_levels must be >= 1".into()));
    }
    let scale = (HBAR * HBAR * mass * gravity * gravity / 2.0).cbrt();
    Ok((1..=n_levels).map(|n| -airy_ai_zero(n) * scale).collect())
}

/// Same levels in reduced units for a ramp of slope `tilt` (units of `V_b/σ_b`):
/// `|a_n| (β tilt²)^{1/3}`.
pub fn triangular_levels_reduced(stiffness: f64, tilt: f64, n_levels: usize) -> Result<Vec<f64>> {
    if tilt == 0.0 {
        return Err(Error::NoBoundStates);
    }
    let scale = (stiffness * tilt * tilt).cbrt();
    Ok((1..=n_levels).map(|n| -airy_ai_zero(n) * scale).collect())
}
