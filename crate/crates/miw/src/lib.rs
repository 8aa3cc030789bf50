//! Many-interacting-worlds (MIW) simulation toolkit.
//!
//! N coupled classical "worlds" interact through a repulsive interworld
//! potential built from a kernel density estimate of the world positions.
//! The equilibrium of that ensemble approximates a quantum ground state;
//! with a Langevin thermostat attached it reproduces thermal statistics
//! and barrier-jumping rates. A matrix Numerov eigensolver provides the
//! in-repo reference solution on the same grids.
//!
//! Units throughout: eV, Angstrom, fs (masses in eV fs^2/A^2).

pub mod density;
pub mod dynamics;
pub mod experiments;
pub mod forces;
pub mod grid;
pub mod groundstate;
pub mod kernels;
pub mod numerov;
pub mod potentials;
pub mod rates;
pub mod units;

pub use density::WorldEnsemble;
pub use grid::{GridField, GridSpec};
pub use kernels::{KernelFamily, KernelSpec};
pub use potentials::PotentialSpec;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum MiwError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("evaluation at Lennard-Jones singularity (|x - x0| = {dist:.3e} A)")]
    Singularity { dist: f64 },
    #[error("energy {energy} eV outside the valid range (0, {barrier}) eV")]
    EnergyOutOfRange { energy: f64, barrier: f64 },
    #[error("degenerate configuration: zero positional spread")]
    DegenerateConfiguration,
    #[error("world positions not strictly increasing at index {index}")]
    OrderingViolation { index: usize },
    #[error("gap below divergence guard at index {index}")]
    VanishingGap { index: usize },
    #[error("grid mismatch between fields")]
    GridMismatch,
    #[error("flat density: integral of squared laplacian is zero")]
    FlatDensity,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite force at world {world}")]
    NonFiniteForce { world: usize },
    #[error("unsupported potential-energy mode: {0}")]
    UnsupportedMode(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("relaxation diverged: energy rose from {from:.6} to {to:.6} eV")]
    RelaxDiverged { from: f64, to: f64 },
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("fit failure: {0}")]
    FitFailed(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MiwError>;
