//! Simulation and numerical toolkit for the two-species simple exclusion
//! process: kinetic Monte Carlo on periodic lattices, lattice transport
//! coefficients, and finite-volume solvers for the matching cross-diffusion
//! systems.

pub mod coefficients;
pub mod continuum;
pub mod estimators;
pub mod experiments;
pub mod kmc;
pub mod lattice;
pub mod oracle;
pub mod solver;

pub use coefficients::{
    ChiVariant, CoefficientsError, MuVariant, PsiTable, SelfDiffusionModel, TransportCoefficients,
};
pub use continuum::{
    check_spd, free_energy, mobility_matrix, ContinuumError, ContinuumParams, DensityFields,
    MobilityModel, SpdReport,
};
pub use estimators::{
    density_profile, empirical_energy, empirical_energy_profile, self_diffusion_from_window,
    DensityProfile, EnergyEstimate, EstimatorError,
};
pub use experiments::{
    run_experiment, run_kmc_dump, run_pde_only, ConfigError, ExperimentConfig, ExperimentError,
    ExperimentKind, RunReport,
};
pub use kmc::{KmcEngine, KmcError, KmcRun, KmcRunConfig, KmcStats, StepOutcome, SumTree};
pub use oracle::{total_variation, ExactChain, OracleError};
pub use solver::{PdeRun, PdeRunConfig, PdeSolver, PdeStats, SolverError, SteadyReport};
pub use lattice::{
    InitMode, LatticeError, LatticeGeometry, LatticeState, NeighborTable, Particle, PotentialSpec,
    Species, SpeciesParams,
};
