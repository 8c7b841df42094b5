//! Deterministic system builders shared by the benchmarks: no RNG needed to
//! set up a half-filled lattice or a segregated continuum field.

use sep_core::experiments::splitmix64;
use sep_core::{
    ContinuumParams, DensityFields, KmcEngine, LatticeGeometry, LatticeState, MobilityModel,
    PdeSolver, PotentialSpec, Species, SpeciesParams,
};

/// Scatter red particles over a fraction `phi` of the sites using a hash of
/// the site index, so every call builds the same configuration.
pub fn scattered_state(side: usize, phi: f64) -> LatticeState {
    let geom = LatticeGeometry::new(2, side).expect("valid geometry");
    let mut state = LatticeState::empty(geom);
    let threshold = (phi * u64::MAX as f64) as u64;
    for site in 0..geom.n_sites() {
        if splitmix64(site as u64) < threshold {
            state.place(site, Species::Red, false);
        }
    }
    state
}

fn species(potential_amplitude: f64) -> [SpeciesParams; 2] {
    let potential = |a: f64| {
        if a == 0.0 {
            PotentialSpec::Zero
        } else {
            PotentialSpec::Sinusoidal { amplitude: a, wavevector: [1, 0, 0] }
        }
    };
    [
        SpeciesParams::new(Species::Red, 1.0, potential(potential_amplitude)),
        SpeciesParams::new(Species::Blue, 1.0, potential(-potential_amplitude)),
    ]
}

/// Jump-process engine on a half-filled grid; `potential_amplitude = 0`
/// selects the uniform-rate sampler, anything else the dynamic rate tree.
pub fn engine(side: usize, potential_amplitude: f64) -> KmcEngine {
    let state = scattered_state(side, 0.5);
    KmcEngine::new(state, &species(potential_amplitude)).expect("engine builds")
}

/// Solver plus a smooth segregated initial field for one model.
pub fn solver_setup(side: usize, model: MobilityModel) -> (PdeSolver, DensityFields) {
    let geom = LatticeGeometry::new(2, side).expect("valid geometry");
    let fields = DensityFields::from_fn(
        geom,
        |x| 0.25 + 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin(),
        |x| 0.25 - 0.2 * (2.0 * std::f64::consts::PI * x[0]).sin(),
    );
    let params = ContinuumParams {
        species: species(1.0),
        alpha: std::f64::consts::FRAC_PI_2 - 1.0,
        model,
    };
    let solver = PdeSolver::new(geom, params, 0.2).expect("solver builds");
    (solver, fields)
}
