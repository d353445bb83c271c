//! Initial states and their first two moments.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Grid, Reduced, Representation, Scales, WaveFunction, HBAR};

/// Tail amplitude allowed at the grid edges.
const EDGE_TAIL: f64 = 1e-12;

/// Means and widths in reduced units (`z` in σ_b, momentum as wavenumber in 1/σ_b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketMoments {
    pub mean_position: f64,
    pub mean_wavenumber: f64,
    pub width_position: f64,
    pub width_wavenumber: f64,
}

/// Same moments in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketMomentsSi {
    pub mean_position_m: f64,
    pub mean_momentum_kg_m_s: f64,
    pub delta_z_m: f64,
    pub delta_p_kg_m_s: f64,
}

impl PacketMoments {
    pub fn to_si(&self, scales: &Scales) -> PacketMomentsSi {
        PacketMomentsSi {
            mean_position_m: scales.length_to_si(self.mean_position),
            mean_momentum_kg_m_s: scales.wavenumber_to_si(self.mean_wavenumber),
            delta_z_m: scales.length_to_si(self.width_position),
            delta_p_kg_m_s: scales.wavenumber_to_si(self.width_wavenumber),
        }
    }

    /// `Δz·Δk`, bounded below by 1/2.
    pub fn uncertainty_product(&self) -> f64 {
        self.width_position * self.width_wavenumber
    }

    /// `Δp / (m v_R)`.
    pub fn momentum_width_over_recoil(&self, scales: &Scales, mass: f64, recoil_velocity: f64) -> f64 {
        scales.wavenumber_to_si(self.width_wavenumber) / (mass * recoil_velocity)
    }
}

fn gaussian_envelope(z: f64, center: f64, width: f64) -> f64 {
    (2.0 * PI * width * width).powf(-0.25) * (-(z - center).powi(2) / (4.0 * width * width)).exp()
}

fn check_fits(grid: &Grid, center: f64, width: f64) -> Result<()> {
    let left = center - grid.z_min();
    let right = grid.z_max() - center;
    if left <= 6.0 * width || right <= 6.0 * width {
        return Err(Error::PacketTooWide(format!(
            "center {center} with width {width} is within 6 widths of the grid edge [{}, {}]",
            grid.z_min(),
            grid.z_max()
        )));
    }
    let tail = gaussian_envelope(center + left.min(right), center, width);
    if tail >= EDGE_TAIL {
        return Err(Error::PacketTooWide(format!("edge amplitude {tail:e} exceeds {EDGE_TAIL:e}")));
    }
    Ok(())
}

/// Gaussian `(2πΔz²)^{−1/4} exp(−(z−z₀)²/4Δz² + i k₀(z−z₀))`.
pub fn gaussian(grid: Arc<Grid>, center: f64, width: f64, wavenumber: f64) -> Result<WaveFunction> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("packet width must be positive, got {width}")));
    }
    check_fits(&grid, center, width)?;
    let mut psi = WaveFunction::from_fn(grid, |z| {
        gaussian_envelope(z, center, width) * Complex64::from_polar(1.0, wavenumber * (z - center))
    });
    psi.normalize()?;
    Ok(psi)
}

/// Gaussian built from the packet fields of `model`.
pub fn gaussian_packet(model: &Reduced, grid: Arc<Grid>) -> Result<WaveFunction> {
    gaussian(grid, model.packet_center, model.packet_width, model.packet_wavenumber)
}

/// Norm of `(e^{ikz} + e^{−ikz}) g(z)` for a normalized Gaussian `g` of width `Δz`:
/// `2(1 + e^{−2k²Δz²})`.
pub fn superposition_norm(width: f64, wavenumber: f64) -> f64 {
    2.0 * (1.0 + (-2.0 * wavenumber * wavenumber * width * width).exp())
}

/// `[e^{ik₀z} + e^{−ik₀z}] g(z; Δz)` centered at zero, normalized with the
/// interference term. `barrier_center` is `z_+` in σ_b; the packet must satisfy
/// `3Δz < z_+`.
pub fn symmetric_superposition(
    width: f64,
    wavenumber: f64,
    barrier_center: f64,
    grid: Arc<Grid>,
) -> Result<WaveFunction> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("packet width must be positive, got {width}")));
    }
    if 3.0 * width >= barrier_center {
        return Err(Error::OverlapWithBarrier(format!(
            "3Δz = {} reaches the barrier center at {}",
            3.0 * width,
            barrier_center
        )));
    }
    check_fits(&grid, 0.0, width)?;
    let scale = superposition_norm(width, wavenumber).sqrt().recip();
    let psi = WaveFunction::from_fn(grid, |z| {
        Complex64::new(2.0 * scale * gaussian_envelope(z, 0.0, width) * (wavenumber * z).cos(), 0.0)
    });
    Ok(psi)
}

fn weighted_moments(x: &[f64], w: &[f64], step: f64) -> (f64, f64) {
    let norm: f64 = w.iter().sum::<f64>() * step;
    let mean = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * step / norm;
    let var = x.iter().zip(w).map(|(a, b)| (a - mean).powi(2) * b).sum::<f64>() * step / norm;
    (mean, var.max(0.0).sqrt())
}

/// Moments by quadrature in position and momentum space.
pub fn moments(psi: &WaveFunction) -> PacketMoments {
    let (pos, mom) = match psi.representation() {
        Representation::Position => (psi.clone(), psi.to_momentum()),
        Representation::Momentum => (psi.to_position(), psi.clone()),
    };
    let grid = psi.grid();
    let (mz, dz) = weighted_moments(&grid.positions(), &pos.density(), grid.dz());
    let (mk, dk) = weighted_moments(&grid.wavenumbers(), &mom.density(), grid.dk());
    PacketMoments { mean_position: mz, mean_wavenumber: mk, width_position: dz, width_wavenumber: dk }
}

/// Lower bound `ħ/2` on `Δz·Δp` in SI.
pub const HEISENBERG_BOUND: f64 = HBAR / 2.0;

/// CSV `z_m,re_psi,im_psi,density` with ψ in 1/√m.
pub fn write_wavefunction_csv<W: std::io::Write>(
    psi: &WaveFunction,
    scales: &Scales,
    mut out: W,
) -> std::io::Result<()> {
    let pos = match psi.representation() {
        Representation::Position => psi.clone(),
        Representation::Momentum => psi.to_position(),
    };
    let amp = scales.length.sqrt().recip();
    writeln!(out, "z_m,re_psi,im_psi,density")?;
    for (i, a) in pos.amplitudes().iter().enumerate() {
        let z = scales.length_to_si(pos.grid().z(i));
        let a = a * amp;
        writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", z, a.re, a.im, a.norm_sqr())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use proptest::prelude::*;

    fn grid(half: f64, n: usize) -> Arc<Grid> {
        Arc::new(Grid::symmetric(half, n).unwrap())
    }

    #[test]
    fn reference_packet_targets() {
        let mut p = ModelParams::reference();
        p.packet_momentum_kg_m_s = 3.0 * HBAR / p.barrier_width_m * 0.1;
        let r = p.reduced().unwrap();
        let psi = gaussian_packet(&r, grid(200.0, 4096)).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let m = moments(&psi);
        assert!((m.mean_position / r.packet_center - 1.0).abs() < 1e-6);
        assert!((m.mean_wavenumber / r.packet_wavenumber - 1.0).abs() < 1e-6);
        assert!((m.width_position / r.packet_width - 1.0).abs() < 1e-6);
        assert!((m.width_wavenumber * 2.0 * r.packet_width - 1.0).abs() < 1e-6);
        let si = m.to_si(&p.scales().unwrap());
        assert!((si.delta_p_kg_m_s * si.delta_z_m / HEISENBERG_BOUND - 1.0).abs() < 1e-6);
    }

    #[test]
    fn momentum_density_closed_form() {
        let (w, k0) = (6.0, 0.7);
        let psi = gaussian(grid(150.0, 4096), -20.0, w, k0).unwrap();
        let phi = psi.to_momentum();
        for (k, d) in phi.grid().wavenumbers().iter().zip(phi.density()) {
            let exact = (2.0 / PI).sqrt() * w * (-2.0 * w * w * (k - k0).powi(2)).exp();
            assert!((d - exact).abs() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn too_wide_rejected() {
        let g = grid(50.0, 512);
        assert!(matches!(gaussian(g.clone(), 0.0, 9.0, 0.0), Err(Error::PacketTooWide(_))));
        assert!(matches!(gaussian(g, 40.0, 3.0, 0.0), Err(Error::PacketTooWide(_))));
    }

    #[test]
    fn superposition_limits() {
        let g = grid(100.0, 2048);
        let zero = symmetric_superposition(3.0, 0.0, 10.5, g.clone()).unwrap();
        let plain = gaussian(g.clone(), 0.0, 3.0, 0.0).unwrap();
        assert!((zero.norm_sqr() - 1.0).abs() < 1e-12);
        for (a, b) in zero.amplitudes().iter().zip(plain.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        // large k₀Δz: cross term negligible, each branch carries 1/√2
        let (w, k) = (3.0, 2.0);
        assert!((-2.0 * k * k * w * w as f64).exp() < 1e-6);
        assert!((superposition_norm(w, k).sqrt().recip() - 0.5f64.sqrt()).abs() < 1e-6);
        let psi = symmetric_superposition(w, k, 10.5, g).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let m = moments(&psi);
        assert!(m.mean_wavenumber.abs() < 1e-12);
        // two delta peaks at ±k plus the Gaussian width in quadrature
        let oracle = (k * k + 1.0 / (4.0 * w * w)).sqrt();
        assert!((m.width_wavenumber / oracle - 1.0).abs() < 1e-6);
    }

    #[test]
    fn superposition_overlap_guard() {
        let g = grid(100.0, 2048);
        assert!(matches!(
            symmetric_superposition(3.6, 0.5, 10.5, g.clone()),
            Err(Error::OverlapWithBarrier(_))
        ));
        assert!(symmetric_superposition(3.0, 0.5, 10.5, g).is_ok());
    }

    #[test]
    fn superposition_momentum_peaks_symmetric() {
        let psi = symmetric_superposition(3.0, 1.2, 10.5, grid(100.0, 2048)).unwrap();
        let phi = psi.to_momentum();
        let k = phi.grid().wavenumbers();
        let d = phi.density();
        let peak = |lo: f64, hi: f64| {
            k.iter().zip(&d).filter(|(x, _)| **x > lo && **x < hi).fold((0.0, 0.0), |acc, (x, y)| {
                if *y > acc.1 {
                    (*x, *y)
                } else {
                    acc
                }
            })
        };
        let (kp, dp) = peak(0.0, 10.0);
        let (km, dm) = peak(-10.0, 0.0);
        assert!((kp + km).abs() < 1e-9 && (kp - 1.2).abs() < phi.grid().dk());
        assert!((dp - dm).abs() < 1e-10);
    }

    #[test]
    fn csv_dump_header_and_rows() {
        let psi = gaussian(grid(40.0, 256), 0.0, 3.0, 0.2).unwrap();
        let mut buf = Vec::new();
        write_wavefunction_csv(&psi, &ModelParams::reference().scales().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "z_m,re_psi,im_psi,density");
        assert_eq!(text.lines().count(), 257);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn heisenberg_bound(w in 1.0..8.0f64, k0 in -1.5..1.5f64, c in -20.0..20.0f64, chirp in -0.05..0.05f64) {
            let g = grid(120.0, 2048);
            let mut psi = gaussian(g, c, w, k0).unwrap();
            let grid = psi.grid().clone();
            for (i, a) in psi.amplitudes_mut().iter_mut().enumerate() {
                *a *= Complex64::from_polar(1.0, chirp * (grid.z(i) - c).powi(2));
            }
            let m = moments(&psi);
            prop_assert!(m.uncertainty_product() >= 0.5 - 1e-9);
        }

        #[test]
        fn superposition_norm_matches_quadrature(w in 1.0..3.0f64, k in 0.0..1.0f64) {
            let g = grid(60.0, 1024);
            let raw = WaveFunction::from_fn(g, |z| Complex64::new(2.0 * gaussian_envelope(z, 0.0, w) * (k * z).cos(), 0.0));
            prop_assert!((raw.norm_sqr() / superposition_norm(w, k) - 1.0).abs() < 1e-10);
        }
    }
}
