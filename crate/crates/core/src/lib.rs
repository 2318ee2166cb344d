//! Workbench for evolving spiking networks whose synapses are
//! phenomenological memristor models, evaluated on a simulated 2D
//! navigation task.
//!
//! The crate splits along the natural seams of the system:
//!
//! * [`snn`] — the leaky integrate-and-fire engine and action decoding;
//! * [`synapse`] — device models, charge-to-weight maps, and the
//!   coincidence plasticity rule;
//! * [`evolution`] — the steady-state genetic algorithm with self-adaptive
//!   rates and topology operators;
//! * [`arena`] — the walled arena, sensors, kinematics, and trials;
//! * [`harness`] — experiment orchestration, snapshots, and analyses;
//! * [`stats`] — the unequal-variance t-test used by run comparisons;
//! * [`config`] — flat key=value overrides for every tunable.
//!
//! Everything stochastic flows from explicit seedable generators, so any
//! run, trial, or artifact reproduces bit-identically from its seed.

pub mod arena;
pub mod config;
pub mod evolution;
pub mod harness;
pub mod snn;
pub mod stats;
pub mod synapse;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("stats error: {0}")]
    Stats(String),
}

pub type Result<T> = std::result::Result<T, Error>;
