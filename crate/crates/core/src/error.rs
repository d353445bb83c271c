use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear potential with g = 0 has no bound states")]
    NoBoundStates,

    #[error("packet does not fit in the grid: {0}")]
    PacketTooWide(String),

    #[error("initial state overlaps a barrier: {0}")]
    OverlapWithBarrier(String),

    #[error("grid mismatch between wave function and operator")]
    GridMismatch,

    #[error("wave function reached the grid boundary at t = {time} (edge density {density:e})")]
    BoundaryReached { time: f64, density: f64 },

    #[error("evolution hit the time cap t = {time} with cavity population {cavity_population}")]
    NotConverged { time: f64, cavity_population: f64 },

    #[error("transfer matrices require g = 0 (got tilt {0})")]
    GravityNonzero(f64),

    #[error("momentum averaging not applicable: {0}")]
    Applicability(String),

    #[error("transmission spectrum did not converge after {doublings} doublings (last change {change:e})")]
    SpectrumNotConverged { doublings: usize, change: f64 },

    #[error("complex scaling angle {0} outside (0, pi/4)")]
    ThetaOutOfRange(f64),

    #[error("scaling box too small: {0}")]
    BoxTooSmall(String),

    #[error("no eigenvalue passed the theta-plateau test")]
    NoPlateau,

    #[error("lost track of resonance {index} at g = {gravity}")]
    TrackLost { index: usize, gravity: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
