//! Quasi-bound states by uniform complex scaling on a sine Lagrange mesh.
//!
//! The mesh on `[−L, L]` has points `x_i = −L + i h`, `h = 2L/(N+1)`,
//! `i = 1..=N`, the Gauss quadrature nodes of the sine basis with Dirichlet
//! walls at `±L`. The kinetic matrix is the closed Colbert–Miller form; the
//! potential is diagonal, evaluated at `x_i e^{iθ}`. Under `z → z e^{iθ}` the
//! Hamiltonian becomes `e^{−2iθ} T + V(z e^{iθ})`, resonances appear as
//! θ-independent eigenvalues `E_r − iΓ/2`.

use std::f64::consts::PI;

use ndarray::Array2;
use ndarray_linalg::EigVals;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Reduced, Scales, HBAR};
use crate::potentials::{cavity_terms, evaluate_terms_complex, triangular_levels_reduced, PotentialTerm};

pub const DEFAULT_THETA: f64 = 0.15;
pub const DEFAULT_BASIS: usize = 512;
/// Default half-width of the scaling box, in σ_b.
pub const DEFAULT_BOX: f64 = 60.0;
/// Relative θ variation of the plateau test.
pub const PLATEAU_SPAN: f64 = 0.1;
/// Largest barrier value allowed at the box edge.
const EDGE_TAIL: f64 = 1e-10;

/// Mesh and scaling settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingSetup {
    pub theta: f64,
    pub basis_size: usize,
    /// Half-width `L` in σ_b.
    pub half_width: f64,
}

impl Default for ScalingSetup {
    fn default() -> Self {
        ScalingSetup { theta: DEFAULT_THETA, basis_size: DEFAULT_BASIS, half_width: DEFAULT_BOX }
    }
}

impl ScalingSetup {
    pub fn with_theta(self, theta: f64) -> Self {
        ScalingSetup { theta, ..self }
    }

    pub fn mesh(&self) -> Vec<f64> {
        let h = 2.0 * self.half_width / (self.basis_size + 1) as f64;
        (1..=self.basis_size).map(|i| -self.half_width + i as f64 * h).collect()
    }
}

/// Sine-basis kinetic matrix for `−β d²/dx²` on `N` interior points of `[−L, L]`.
pub fn kinetic_matrix(stiffness: f64, basis_size: usize, half_width: f64) -> Array2<f64> {
    let n1 = (basis_size + 1) as f64;
    let pref = stiffness * PI * PI / (2.0 * (2.0 * half_width).powi(2));
    Array2::from_shape_fn((basis_size, basis_size), |(a, b)| {
        let (i, j) = ((a + 1) as f64, (b + 1) as f64);
        if a == b {
            pref * ((2.0 * n1 * n1 + 1.0) / 3.0 - 1.0 / (PI * i / n1).sin().powi(2))
        } else {
            let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
            pref * sign
                * (1.0 / (PI * (i - j) / (2.0 * n1)).sin().powi(2) - 1.0 / (PI * (i + j) / (2.0 * n1)).sin().powi(2))
        }
    })
}

fn check_setup(terms: &[PotentialTerm], barrier_center: f64, setup: &ScalingSetup) -> Result<()> {
    let th = setup.theta;
    if !(0.0..PI / 4.0).contains(&th) {
        return Err(Error::ThetaOutOfRange(th));
    }
    if setup.basis_size < 64 {
        return Err(Error::InvalidParameter(format!("basis_size must be >= 64, got {}", setup.basis_size)));
    }
    let l = setup.half_width;
    if l < barrier_center + 10.0 {
        return Err(Error::BoxTooSmall(format!("half-width {l} < barrier center {barrier_center} + 10")));
    }
    let tail: f64 = terms
        .iter()
        .filter(|t| matches!(t, PotentialTerm::Gaussian { .. }))
        .map(|t| {
            let at = |z: f64| evaluate_terms_complex(std::slice::from_ref(t), Complex64::new(z, 0.0)).norm();
            at(l).max(at(-l))
        })
        .fold(0.0, f64::max);
    if tail > EDGE_TAIL {
        return Err(Error::BoxTooSmall(format!("barrier value {tail:e} at the box edge")));
    }
    Ok(())
}

/// `e^{−2iθ} T + diag V(x_i e^{iθ})` for arbitrary potential terms.
pub fn scaled_hamiltonian_for(
    terms: &[PotentialTerm],
    stiffness: f64,
    barrier_center: f64,
    setup: &ScalingSetup,
) -> Result<Array2<Complex64>> {
    check_setup(terms, barrier_center, setup)?;
    let rot = Complex64::from_polar(1.0, setup.theta);
    let t_rot = rot.powi(-2);
    let t = kinetic_matrix(stiffness, setup.basis_size, setup.half_width);
    let mut h = t.mapv(|v| t_rot * v);
    for (i, x) in setup.mesh().into_iter().enumerate() {
        h[[i, i]] += evaluate_terms_complex(terms, x * rot);
    }
    Ok(h)
}

/// Complex-scaled cavity Hamiltonian, gravity term `tilt·z e^{iθ}` included.
pub fn complex_scaled_hamiltonian(model: &Reduced, setup: &ScalingSetup) -> Result<Array2<Complex64>> {
    scaled_hamiltonian_for(&cavity_terms(model), model.stiffness, model.barrier_center, setup)
}

/// Eigenvalues of a dense complex matrix, sorted by real part.
pub fn eigenvalues(h: Array2<Complex64>) -> Result<Vec<Complex64>> {
    let ev = h.eigvals().map_err(|e| Error::Eigensolver(e.to_string()))?;
    let mut v = ev.to_vec();
    v.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(v)
}

/// One quasi-bound state, reduced units (`V_b`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub energy: f64,
    pub width: f64,
    pub theta: f64,
    /// θ interval over which the eigenvalue was checked to be stationary.
    pub plateau: f64,
    /// Largest eigenvalue shift over the plateau interval.
    pub plateau_shift: f64,
    /// Rank by energy among the retained states at this tilt.
    pub index: usize,
    /// Trajectory id assigned by [`track_vs_gravity`]; equals `index` at g = 0.
    pub track: usize,
}

impl Resonance {
    pub fn eigenvalue(&self) -> Complex64 {
        Complex64::new(self.energy, -self.width / 2.0)
    }

    /// `arctan(Γ/(2E_r))`; valid while below `2θ`.
    pub fn phase(&self) -> f64 {
        (self.width / (2.0 * self.energy)).atan()
    }

    pub fn energy_j(&self, scales: &Scales) -> f64 {
        scales.energy_to_si(self.energy)
    }

    pub fn gamma_j(&self, scales: &Scales) -> f64 {
        scales.energy_to_si(self.width)
    }

    /// `ħ/Γ`.
    pub fn lifetime_s(&self, scales: &Scales) -> f64 {
        HBAR / self.gamma_j(scales)
    }
}

/// Result of [`find_resonances`] with the basis check, if run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub resonances: Vec<Resonance>,
    /// Largest `|ΔE_r|` when the basis is doubled, `None` if not checked.
    pub basis_shift: Option<f64>,
    pub warnings: Vec<String>,
}

fn nearest(target: Complex64, pool: &[Complex64]) -> (usize, f64) {
    pool.iter()
        .enumerate()
        .map(|(i, z)| (i, (z - target).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty eigenvalue list")
}

fn is_candidate(z: &Complex64, e_max: f64) -> bool {
    z.re > 0.0 && z.re < e_max && z.im < 0.0
}

/// Eigenvalues at `θ` that stay put when θ changes by ±10%.
pub fn plateau_filter(
    terms: &[PotentialTerm],
    stiffness: f64,
    barrier_center: f64,
    setup: &ScalingSetup,
    e_max: f64,
) -> Result<Vec<Resonance>> {
    let thetas = [setup.theta, setup.theta * (1.0 - PLATEAU_SPAN), setup.theta * (1.0 + PLATEAU_SPAN)];
    let spectra: Vec<Vec<Complex64>> = thetas
        .par_iter()
        .map(|th| {
            scaled_hamiltonian_for(terms, stiffness, barrier_center, &setup.with_theta(*th)).and_then(eigenvalues)
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for z in spectra[0].iter().filter(|z| is_candidate(z, e_max)) {
        let width = -2.0 * z.im;
        let shift = nearest(*z, &spectra[1]).1.max(nearest(*z, &spectra[2]).1);
        let res = Resonance {
            energy: z.re,
            width,
            theta: setup.theta,
            plateau: 2.0 * PLATEAU_SPAN * setup.theta,
            plateau_shift: shift,
            index: 0,
            track: 0,
        };
        if shift < (1e-3 * width).max(1e-6) && res.phase() < 2.0 * setup.theta {
            out.push(res);
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    for (i, r) in out.iter_mut().enumerate() {
        r.index = i;
        r.track = i;
    }
    Ok(out)
}

/// Resonances of the cavity with `0 < E_r < e_max`. With `check_basis`, the
/// basis is doubled (box fixed) and shifts above `10⁻³ V_b` in `E_r` or 10% in
/// `Γ` are reported as warnings.
pub fn find_resonances(model: &Reduced, setup: &ScalingSetup, e_max: f64, check_basis: bool) -> Result<ResonanceSet> {
    let terms = cavity_terms(model);
    let resonances = plateau_filter(&terms, model.stiffness, model.barrier_center, setup, e_max)?;
    if resonances.is_empty() {
        return Err(Error::NoPlateau);
    }
    let mut warnings = Vec::new();
    let mut basis_shift = None;
    if check_basis {
        let doubled = ScalingSetup { basis_size: 2 * setup.basis_size, ..*setup };
        let ev = eigenvalues(complex_scaled_hamiltonian(model, &doubled)?)?;
        let mut worst = 0.0_f64;
        for r in &resonances {
            let (i, _) = nearest(r.eigenvalue(), &ev);
            let de = (ev[i].re - r.energy).abs();
            let dg = (-2.0 * ev[i].im - r.width).abs() / r.width;
            worst = worst.max(de);
            if de > 1e-3 || dg > 0.1 {
                warnings.push(format!(
                    "resonance {} moved by ΔE = {de:.3e}, ΔΓ/Γ = {dg:.3e} when the basis was doubled",
                    r.index
                ));
            }
        }
        basis_shift = Some(worst);
    }
    Ok(ResonanceSet { resonances, basis_shift, warnings })
}

/// Resonance table CSV `g_m_s2,j,Er_over_Vb,Gamma_over_Vb,theta_rad,plateau_rad`.
pub fn write_resonance_csv<W: std::io::Write>(rows: &[(f64, Resonance)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "g_m_s2,j,Er_over_Vb,Gamma_over_Vb,theta_rad,plateau_rad")?;
    for (g, r) in rows {
        writeln!(out, "{g:.6e},{},{:.12e},{:.12e},{:.6},{:.6}", r.track, r.energy, r.width, r.theta, r.plateau)?;
    }
    Ok(())
}

/// One resonance followed across tilts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub track: usize,
    /// Tilts in `V_b/σ_b`, ascending.
    pub tilts: Vec<f64>,
    pub energies: Vec<f64>,
    pub widths: Vec<f64>,
    /// Whether the point passed the θ-plateau test.
    pub on_plateau: Vec<bool>,
    /// `E_r − E_tri` at the largest `|tilt|`, with the triangular level of the
    /// same rank and the wall at the uphill barrier center.
    pub triangular_offset: Option<f64>,
}

/// Triangular level `n` (0-based) in the cavity frame: wall at `z_−` for
/// positive tilt, `z_+` for negative tilt.
pub fn triangular_level_in_frame(model: &Reduced, n: usize) -> Result<f64> {
    let levels = triangular_levels_reduced(model.stiffness, model.tilt, n + 1)?;
    let wall = if model.tilt > 0.0 { -model.barrier_center } else { model.barrier_center };
    Ok(model.tilt * wall + levels[n])
}

/// Tracks the resonances found at zero tilt across `tilts` (must contain 0,
/// ascending). At each tilt the nearest plateau-tested eigenvalue is preferred;
/// otherwise the raw spectrum continues the track and the point is flagged. A match farther than
/// half the local level spacing, or two tracks claiming one eigenvalue, is
/// [`Error::TrackLost`].
pub fn track_vs_gravity(
    model: &Reduced,
    tilts: &[f64],
    setup: &ScalingSetup,
    e_max: f64,
) -> Result<Vec<Trajectory>> {
    if !tilts.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::InvalidParameter("tilts must be strictly ascending".into()));
    }
    let zero = tilts
        .iter()
        .position(|t| *t == 0.0)
        .ok_or_else(|| Error::InvalidParameter("tilts must include 0".into()))?;
    let solved: Vec<(Vec<Complex64>, Vec<Resonance>)> = tilts
        .par_iter()
        .map(|t| {
            let m = Reduced { tilt: *t, ..*model };
            let terms = cavity_terms(&m);
            let raw = eigenvalues(scaled_hamiltonian_for(&terms, m.stiffness, m.barrier_center, setup)?)?;
            let kept = plateau_filter(&terms, m.stiffness, m.barrier_center, setup, e_max)?;
            Ok((raw, kept))
        })
        .collect::<Result<_>>()?;
    let start = &solved[zero].1;
    if start.is_empty() {
        return Err(Error::NoPlateau);
    }
    let n = start.len();
    let mut points: Vec<Vec<Option<(Complex64, bool)>>> = vec![vec![None; tilts.len()]; n];
    for (j, r) in start.iter().enumerate() {
        points[j][zero] = Some((r.eigenvalue(), true));
    }
    let order: Vec<Vec<usize>> = vec![(zero + 1..tilts.len()).collect(), (0..zero).rev().collect()];
    for dir in order {
        let mut prev: Vec<Complex64> = start.iter().map(|r| r.eigenvalue()).collect();
        for k in dir {
            let (raw, kept) = &solved[k];
            let kept_ev: Vec<Complex64> = kept.iter().map(|r| r.eigenvalue()).collect();
            let mut claimed = vec![usize::MAX; raw.len()];
            for j in 0..n {
                let spacing = local_spacing(&prev, j);
                let from_kept = (!kept_ev.is_empty())
                    .then(|| nearest(prev[j], &kept_ev))
                    .filter(|(_, d)| *d <= 0.5 * spacing)
                    .map(|(i, _)| nearest(kept_ev[i], raw).0);
                let (i, d) = match from_kept {
                    Some(i) => (i, (raw[i] - prev[j]).norm()),
                    None => nearest(prev[j], raw),
                };
                if d > 0.5 * spacing {
                    return Err(Error::TrackLost { index: j, gravity: tilts[k] });
                }
                if claimed[i] != usize::MAX {
                    return Err(Error::TrackLost { index: j, gravity: tilts[k] });
                }
                claimed[i] = j;
                let on = kept_ev.iter().any(|z| (z - raw[i]).norm() < 1e-12);
                points[j][k] = Some((raw[i], on));
                prev[j] = raw[i];
            }
        }
    }
    let g_end = if tilts[0].abs() > tilts[tilts.len() - 1].abs() { 0 } else { tilts.len() - 1 };
    let mut out = Vec::with_capacity(n);
    for (j, pts) in points.into_iter().enumerate() {
        let pts: Vec<(Complex64, bool)> = pts.into_iter().map(|p| p.expect("filled")).collect();
        let m_end = Reduced { tilt: tilts[g_end], ..*model };
        let tri = if tilts[g_end] != 0.0 { triangular_level_in_frame(&m_end, j).ok() } else { None };
        out.push(Trajectory {
            track: j,
            tilts: tilts.to_vec(),
            energies: pts.iter().map(|p| p.0.re).collect(),
            widths: pts.iter().map(|p| -2.0 * p.0.im).collect(),
            on_plateau: pts.iter().map(|p| p.1).collect(),
            triangular_offset: tri.map(|e| pts[g_end].0.re - e),
        });
    }
    Ok(out)
}

fn local_spacing(prev: &[Complex64], j: usize) -> f64 {
    let mut s = f64::INFINITY;
    if j > 0 {
        s = s.min((prev[j] - prev[j - 1]).norm());
    }
    if j + 1 < prev.len() {
        s = s.min((prev[j + 1] - prev[j]).norm());
    }
    if s.is_finite() {
        s
    } else {
        prev[j].norm().max(1e-3)
    }
}

/// `(Γ/2)² / ((E − E_r)² + (Γ/2)²)` per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub components: Vec<(f64, f64)>,
}

pub fn lorentzian_model(resonances: &[Resonance]) -> Result<SpectrumModel> {
    if resonances.is_empty() {
        return Err(Error::InvalidParameter("no resonances for the Lorentzian model".into()));
    }
    Ok(SpectrumModel { components: resonances.iter().map(|r| (r.energy, r.width)).collect() })
}

pub fn lorentzian(e: f64, e_r: f64, width: f64) -> f64 {
    let h = 0.5 * width;
    h * h / ((e - e_r).powi(2) + h * h)
}

impl SpectrumModel {
    /// Largest component at `e`.
    pub fn eval(&self, e: f64) -> f64 {
        self.components.iter().map(|(er, w)| lorentzian(e, *er, *w)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn model(g: f64) -> Reduced {
        let mut p = ModelParams::reference();
        p.gravity_m_s2 = g;
        p.reduced().unwrap()
    }

    fn small() -> ScalingSetup {
        ScalingSetup::default()
    }

    #[test]
    fn kinetic_closed_form_matches_spectral_route() {
        let (n, l, beta) = (64, 10.0, 0.7);
        let t = kinetic_matrix(beta, n, l);
        let n1 = (n + 1) as f64;
        let s = Array2::from_shape_fn((n, n), |(i, k)| {
            (2.0 / n1).sqrt() * (PI * ((i + 1) * (k + 1)) as f64 / n1).sin()
        });
        let d = Array2::from_diag(&ndarray::Array1::from_shape_fn(n, |k| {
            beta * (PI * (k + 1) as f64 / (2.0 * l)).powi(2)
        }));
        let spectral = s.dot(&d).dot(&s.t());
        for (a, b) in t.iter().zip(spectral.iter()) {
            assert!((a - b).abs() < 1e-9 * t[[0, 0]]);
        }
    }

    #[test]
    fn particle_in_box() {
        let setup = ScalingSetup { theta: 0.0, basis_size: 128, half_width: 25.0 };
        let h = scaled_hamiltonian_for(&[], 1.0, 10.0, &setup).unwrap();
        let herm = h.iter().zip(h.t().iter()).all(|(a, b)| (a - b.conj()).norm() < 1e-10);
        assert!(herm);
        let ev = eigenvalues(h).unwrap();
        for (n, e) in ev.iter().take(5).enumerate() {
            let exact = (PI * (n + 1) as f64 / 50.0).powi(2);
            assert!((e.re / exact - 1.0).abs() < 1e-6 && e.im.abs() < 1e-10);
        }
    }

    #[test]
    fn free_eigenvalues_rotate() {
        let th = 0.2;
        let setup = ScalingSetup { theta: th, basis_size: 64, half_width: 25.0 };
        let ev = eigenvalues(scaled_hamiltonian_for(&[], 1.0, 10.0, &setup).unwrap()).unwrap();
        for (n, e) in ev.iter().take(5).enumerate() {
            let exact = Complex64::from_polar((PI * (n + 1) as f64 / 50.0).powi(2), -2.0 * th);
            assert!((e - exact).norm() < 1e-8 * exact.norm());
        }
    }

    #[test]
    fn setup_errors() {
        let r = model(0.0);
        assert!(matches!(complex_scaled_hamiltonian(&r, &small().with_theta(0.8)), Err(Error::ThetaOutOfRange(_))));
        assert!(matches!(complex_scaled_hamiltonian(&r, &small().with_theta(-0.1)), Err(Error::ThetaOutOfRange(_))));
        let tight = ScalingSetup { half_width: 18.0, ..small() };
        assert!(matches!(complex_scaled_hamiltonian(&r, &tight), Err(Error::BoxTooSmall(_))));
        let coarse = ScalingSetup { basis_size: 32, ..small() };
        assert!(complex_scaled_hamiltonian(&r, &coarse).is_err());
    }

    #[test]
    fn plateau_keeps_resonances_rejects_continuum() {
        let r = model(0.0);
        let set = find_resonances(&r, &small(), 0.5, false).unwrap();
        assert!(set.resonances.len() >= 3);
        for res in &set.resonances {
            assert!(res.width > 0.0 && res.phase() < 2.0 * res.theta);
        }
        // lowest three levels sit near the rounded table energies
        for (res, e) in set.resonances.iter().zip([0.03, 0.10, 0.23]) {
            assert!((res.energy - e).abs() < 0.01, "{} vs {e}", res.energy);
        }
    }

    #[test]
    fn parity_in_tilt() {
        let s = small();
        let up = find_resonances(&model(2e-3), &s, 0.5, false).unwrap().resonances;
        let down = find_resonances(&model(-2e-3), &s, 0.5, false).unwrap().resonances;
        assert_eq!(up.len(), down.len());
        for (a, b) in up.iter().zip(&down) {
            assert!((a.energy - b.energy).abs() < 1e-12 && (a.width - b.width).abs() < 1e-12);
        }
    }

    /// Lowest Dirichlet level between the barrier centers by second-order
    /// finite differences and bisection on the Sturm sequence.
    fn fd_lowest(v: impl Fn(f64) -> f64, beta: f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / (n + 1) as f64;
        let diag: Vec<f64> = (1..=n).map(|i| 2.0 * beta / (h * h) + v(a + i as f64 * h)).collect();
        let off = -beta / (h * h);
        let below = |e: f64| {
            let (mut q, mut count) = (1.0, 0usize);
            for (i, d) in diag.iter().enumerate() {
                q = d - e - if i == 0 { 0.0 } else { off * off / q };
                if q < 0.0 {
                    count += 1;
                }
            }
            count
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if below(mid) >= 1 { hi = mid } else { lo = mid }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn tall_barriers_approach_box_levels() {
        // barriers ten times the reference height: the lowest state is bound to
        // numerical precision and must match a plain Hermitian discretization
        let h = 10.0;
        let terms = [
            PotentialTerm::Gaussian { center: -10.5, width: 1.0, height: h },
            PotentialTerm::Gaussian { center: 10.5, width: 1.0, height: h },
        ];
        let ev = eigenvalues(scaled_hamiltonian_for(&terms, 1.0, 10.5, &ScalingSetup::default()).unwrap()).unwrap();
        let lowest = ev.iter().filter(|z| z.re > 0.0 && z.im.abs() < 1e-8).map(|z| z.re).fold(f64::INFINITY, f64::min);
        let v = |z: f64| h * ((-(z + 10.5f64).powi(2) / 2.0).exp() + (-(z - 10.5f64).powi(2) / 2.0).exp());
        let oracle = fd_lowest(v, 1.0, -16.5, 16.5, 8000);
        assert!((lowest / oracle - 1.0).abs() < 1e-4, "{lowest} vs {oracle}");
    }

    #[test]
    fn lorentzian_properties() {
        let rs = [
            Resonance { energy: 0.1, width: 0.01, theta: 0.15, plateau: 0.03, plateau_shift: 0.0, index: 0, track: 0 },
            Resonance { energy: 0.4, width: 0.05, theta: 0.15, plateau: 0.03, plateau_shift: 0.0, index: 1, track: 1 },
        ];
        let m = lorentzian_model(&rs).unwrap();
        assert_eq!(m.eval(0.1), 1.0);
        assert!((lorentzian(0.4 + 0.025, 0.4, 0.05) - 0.5).abs() < 1e-15);
        assert!((lorentzian(0.4 - 0.025, 0.4, 0.05) - 0.5).abs() < 1e-15);
        assert!(lorentzian_model(&[]).is_err());
    }

    #[test]
    fn tracking_from_zero() {
        let r = model(0.0);
        let s = small();
        let tilts = [-1e-3, 0.0, 1e-3];
        let tr = track_vs_gravity(&r, &tilts, &s, 0.3).unwrap();
        let zero = find_resonances(&r, &s, 0.3, false).unwrap().resonances;
        assert_eq!(tr.len(), zero.len());
        for (t, z) in tr.iter().zip(&zero) {
            assert_eq!(t.energies[1], z.energy);
            assert!(t.triangular_offset.is_some());
        }
        assert!(track_vs_gravity(&r, &[0.001, 0.002], &s, 0.3).is_err());
    }

    #[test]
    fn csv_layout() {
        let r = Resonance { energy: 0.03, width: 2e-5, theta: 0.15, plateau: 0.03, plateau_shift: 0.0, index: 0, track: 0 };
        let mut buf = Vec::new();
        write_resonance_csv(&[(0.0, r)], &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("g_m_s2,j,Er_over_Vb,Gamma_over_Vb,theta_rad,plateau_rad\n"));
        assert_eq!(s.lines().count(), 2);
    }
}
