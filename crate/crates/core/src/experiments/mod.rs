//! Preset experiment campaigns: configuration, orchestration, and output.
//!
//! An experiment couples stochastic lattice runs, continuum solves, and
//! estimators into one reproducible unit: a JSON config fully determines
//! every CSV byte written, and a manifest records seeds, defaults, and
//! timing for audit.

mod config;
mod emit;
mod runner;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, InitSpec};
pub use emit::{fmt_real, time_label, Emitter};
pub use runner::{
    point_seed, run_experiment, run_kmc_dump, run_pde_only, splitmix64, RunReport,
};

/// Anything an experiment can die of.  Config-stage problems are kept apart
/// from runtime failures so callers can exit with distinct status codes.
#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure: {0}")]
    Io(String),
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error(transparent)]
    Kmc(#[from] crate::kmc::KmcError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Estimator(#[from] crate::estimators::EstimatorError),
    #[error(transparent)]
    Continuum(#[from] crate::continuum::ContinuumError),
    #[error(transparent)]
    Coefficients(#[from] crate::coefficients::CoefficientsError),
}

impl ExperimentError {
    /// Process exit status the CLI maps this error to: 2 for configuration
    /// problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            _ => 3,
        }
    }
}
