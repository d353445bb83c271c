//! Simulation and analysis toolkit for a matter-wave Fabry–Pérot cavity in a
//! gravitational field.
//!
//! The cavity is two Gaussian barriers of height `V_b` and width `σ_b` whose
//! centers sit at `±(3σ_b + d/2)`, tilted by `m g z`. Modules:
//!
//! - [`model`]: parameters, unit scales, grids and wave functions
//! - [`potentials`]: cavity and triangular reference potentials
//! - [`wavepackets`]: initial states and their moments
//! - [`propagator`]: split-step Schrödinger / Gross–Pitaevskii evolution
//! - [`scattering`]: transfer-matrix transmission spectra
//! - [`resonances`]: complex-scaled Lagrange-mesh resonance finder
//! - [`sensing`]: transmission observables and acceleration sensitivity
//! - [`runner`]: scenario orchestration, CSV/JSON/SVG output and the CLI core

pub mod airy;
pub mod error;
pub mod model;
pub mod numerics;
pub mod potentials;
pub mod propagator;
pub mod resonances;
pub mod runner;
pub mod scattering;
pub mod sensing;
pub mod svg;
pub mod wavepackets;

pub use error::{Error, Result};
pub use model::{build_grid, make_scales, Grid, ModelParams, Reduced, Representation, Scales, WaveFunction, HBAR};
