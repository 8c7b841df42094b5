//! Macroscopic description: two density fields on the same periodic grid and
//! the cross-diffusion mobility closures relating their gradients to fluxes.
//!
//! The hydrodynamic system has gradient-flow form
//! `dt rho = div( M(rho) grad (dE/drho) )` with the mixing free energy
//! `E = INT rho_r ln rho_r + rho_b ln rho_b + (1-rho) ln(1-rho) + rho_r V_r +
//! rho_b V_b`. Three closures for the 2x2 mobility matrix `M` are provided;
//! they agree at leading order in density but differ in how cross-species
//! drag is approximated.

use crate::coefficients::{self, MuVariant, SelfDiffusionModel};
use crate::lattice::{InitMode, LatticeGeometry, SpeciesParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ContinuumError {
    #[error("{what} = {value} outside {range}")]
    OutOfRange { what: &'static str, value: f64, range: &'static str },
    #[error("model requires {requirement}, got D_r = {d_r}, D_b = {d_b}")]
    ModelMismatch { requirement: &'static str, d_r: f64, d_b: f64 },
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
}

/// Red and blue density fields sampled at cell centres of a periodic grid.
#[derive(Clone, Debug)]
pub struct DensityFields {
    pub geom: LatticeGeometry,
    pub red: Vec<f64>,
    pub blue: Vec<f64>,
    pub time: f64,
}

impl DensityFields {
    pub fn uniform(geom: LatticeGeometry, rho_r: f64, rho_b: f64) -> Self {
        let n = geom.n_sites();
        DensityFields { geom, red: vec![rho_r; n], blue: vec![rho_b; n], time: 0.0 }
    }

    pub fn from_fn(
        geom: LatticeGeometry,
        mut red: impl FnMut([f64; 3]) -> f64,
        mut blue: impl FnMut([f64; 3]) -> f64,
    ) -> Self {
        let n = geom.n_sites();
        let mut f = DensityFields { geom, red: vec![0.0; n], blue: vec![0.0; n], time: 0.0 };
        for s in 0..n {
            let x = geom.position(s);
            f.red[s] = red(x);
            f.blue[s] = blue(x);
        }
        f
    }

    /// The deterministic density profile that a stochastic initial condition
    /// concentrates on: uniform fields for the uniform modes, sharp blocks
    /// for the block mode.
    pub fn from_init_mode(geom: LatticeGeometry, mode: &InitMode) -> Result<Self, ContinuumError> {
        let n = geom.n_sites();
        Ok(match *mode {
            InitMode::FixedCountUniform { n_red, n_blue } => {
                Self::uniform(geom, n_red as f64 / n as f64, n_blue as f64 / n as f64)
            }
            InitMode::BernoulliUniform { p_red, p_blue } => Self::uniform(geom, p_red, p_blue),
            InitMode::AxisBlocks { phi, axis, split } => Self::from_fn(
                geom,
                |x| if x[axis] <= split { phi } else { 0.0 },
                |x| if x[axis] <= split { 0.0 } else { phi },
            ),
        })
    }

    /// Integral of one field over the torus (`h^d` times the sum).
    pub fn mass(&self, field: &[f64]) -> f64 {
        let h = self.geom.spacing();
        field.iter().sum::<f64>() * h.powi(self.geom.dim() as i32)
    }

    pub fn total_at(&self, s: usize) -> f64 {
        self.red[s] + self.blue[s]
    }
}

/// Closures for the 2x2 mobility matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum MobilityModel {
    /// `M = (1 - rho) diag(D_r rho_r, D_b rho_b)`: crowding without
    /// cross-species drag.
    MeanField,
    /// Mean field plus the leading-order drag exchange:
    /// `M = (1-rho) diag(D_s rho_s)
    ///      - 2 alpha (1-rho) rho_r rho_b / (D_r + D_b) * [[D_r^2, -D_r D_b], [-D_r D_b, D_b^2]]`.
    /// The `Spd` mu-variant damps the drag term by an extra `(1 - rho)`,
    /// which keeps the matrix positive semidefinite at every diffusivity
    /// ratio.
    MatchedLowDensity { mu_variant: MuVariant },
    /// Interpolation built from the tracer self-diffusion coefficient,
    /// requiring equal diffusivities `D_r = D_b = D`:
    /// `M = D [ (1-rho)/rho * rho rho^T + Ds(rho) rho_r rho_b / rho * [[1,-1],[-1,1]] ]`.
    CompositeQuastel,
}

/// Everything the macroscopic model needs besides the densities themselves.
#[derive(Clone, Debug)]
pub struct ContinuumParams {
    pub species: [SpeciesParams; 2],
    /// Lattice interaction constant for this dimension.
    pub alpha: f64,
    pub model: MobilityModel,
}

impl ContinuumParams {
    pub fn d_red(&self) -> f64 {
        self.species[0].d_coef
    }
    pub fn d_blue(&self) -> f64 {
        self.species[1].d_coef
    }
}

/// The symmetric 2x2 mobility matrix at one point, `[[rr, rb], [br, bb]]`.
pub fn mobility_matrix(
    params: &ContinuumParams,
    rho_r: f64,
    rho_b: f64,
) -> Result<[[f64; 2]; 2], ContinuumError> {
    for (what, v) in [("rho_r", rho_r), ("rho_b", rho_b)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ContinuumError::OutOfRange { what, value: v, range: "[0,1]" });
        }
    }
    let rho = rho_r + rho_b;
    if rho > 1.0 + 1e-12 {
        return Err(ContinuumError::OutOfRange { what: "rho_r + rho_b", value: rho, range: "[0,1]" });
    }
    let (d_r, d_b) = (params.d_red(), params.d_blue());
    let hole = (1.0 - rho).max(0.0);
    Ok(match params.model {
        MobilityModel::MeanField => [[hole * d_r * rho_r, 0.0], [0.0, hole * d_b * rho_b]],
        MobilityModel::MatchedLowDensity { mu_variant } => {
            let damp = match mu_variant {
                MuVariant::Standard => 1.0,
                MuVariant::Spd => hole,
            };
            let drag = 2.0 * params.alpha * damp * hole * rho_r * rho_b / (d_r + d_b);
            let off = drag * d_r * d_b;
            [
                [hole * d_r * rho_r - drag * d_r * d_r, off],
                [off, hole * d_b * rho_b - drag * d_b * d_b],
            ]
        }
        MobilityModel::CompositeQuastel => {
            if d_r != d_b {
                return Err(ContinuumError::ModelMismatch {
                    requirement: "equal diffusivities",
                    d_r,
                    d_b,
                });
            }
            if rho <= 1e-12 {
                [[0.0; 2]; 2]
            } else {
                let ds = coefficients::self_diffusion_unit(
                    SelfDiffusionModel::Composite,
                    params.alpha,
                    rho.min(1.0),
                );
                let a = hole / rho;
                let c = ds * rho_r * rho_b / rho;
                [
                    [d_r * (a * rho_r * rho_r + c), d_r * (a * rho_r * rho_b - c)],
                    [d_r * (a * rho_r * rho_b - c), d_r * (a * rho_b * rho_b + c)],
                ]
            }
        }
    })
}

/// Mixing free energy `h^d sum [ rho_r ln rho_r + rho_b ln rho_b +
/// (1 - rho) ln(1 - rho) + rho_r V_r + rho_b V_b ]`, the Lyapunov functional
/// of all three closures.
pub fn free_energy(fields: &DensityFields, params: &ContinuumParams) -> Result<f64, ContinuumError> {
    fn xlogx(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            x * x.ln()
        }
    }
    let geom = fields.geom;
    let v_r = params.species[0].potential.field(&geom)?;
    let v_b = params.species[1].potential.field(&geom)?;
    let mut e = 0.0;
    for s in 0..geom.n_sites() {
        let (r, b) = (fields.red[s], fields.blue[s]);
        e += xlogx(r) + xlogx(b) + xlogx(1.0 - r - b) + r * v_r[s] + b * v_b[s];
    }
    Ok(e * geom.spacing().powi(geom.dim() as i32))
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(m: [[f64; 2]; 2]) -> f64 {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    half_tr - (half_tr * half_tr - det).max(0.0).sqrt()
}

/// Result of scanning a mobility closure for positive semidefiniteness over
/// the density simplex.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpdReport {
    pub min_eigenvalue: f64,
    pub at_rho_r: f64,
    pub at_rho_b: f64,
    /// True when no eigenvalue drops below `-1e-12` anywhere on the grid.
    pub is_positive_semidefinite: bool,
}

/// Scan `rho_r, rho_b >= step` on a grid of the given step over the simplex
/// `rho <= 1` and report the most negative mobility eigenvalue.
pub fn check_spd(params: &ContinuumParams, step: f64) -> Result<SpdReport, ContinuumError> {
    if !(step > 0.0 && step < 0.5) {
        return Err(ContinuumError::OutOfRange { what: "step", value: step, range: "(0, 0.5)" });
    }
    let n = (1.0 / step).floor() as usize;
    let mut report = SpdReport {
        min_eigenvalue: f64::INFINITY,
        at_rho_r: 0.0,
        at_rho_b: 0.0,
        is_positive_semidefinite: true,
    };
    for i in 1..n {
        for j in 1..n {
            let (rho_r, rho_b) = (i as f64 * step, j as f64 * step);
            if rho_r + rho_b > 1.0 {
                continue;
            }
            let m = mobility_matrix(params, rho_r, rho_b)?;
            let lam = min_eigenvalue(m);
            if lam < report.min_eigenvalue {
                report.min_eigenvalue = lam;
                report.at_rho_r = rho_r;
                report.at_rho_b = rho_b;
            }
        }
    }
    report.is_positive_semidefinite = report.min_eigenvalue >= -1e-12;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{PotentialSpec, Species};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(d_r: f64, d_b: f64, model: MobilityModel) -> ContinuumParams {
        ContinuumParams {
            species: [
                SpeciesParams::new(Species::Red, d_r, PotentialSpec::Zero),
                SpeciesParams::new(Species::Blue, d_b, PotentialSpec::Zero),
            ],
            alpha: PI / 2.0 - 1.0,
            model,
        }
    }

    #[test]
    fn matched_low_density_reference_matrix() {
        let p = params(1.0, 1.0, MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Standard });
        let m = mobility_matrix(&p, 0.25, 0.25).unwrap();
        assert_abs_diff_eq!(m[0][0], 0.10716261478765948, epsilon = 1e-15);
        assert_abs_diff_eq!(m[0][1], 0.017837385212340517, epsilon = 1e-15);
        assert_eq!(m[0][1], m[1][0]);
        assert_abs_diff_eq!(m[1][1], m[0][0], epsilon = 1e-15);
    }

    #[test]
    fn composite_quastel_reference_matrix() {
        let p = params(1.0, 1.0, MobilityModel::CompositeQuastel);
        let m = mobility_matrix(&p, 0.25, 0.25).unwrap();
        assert_abs_diff_eq!(m[0][0], 0.10775227937702131, epsilon = 1e-14);
        assert_abs_diff_eq!(m[0][1], 0.017247720622978698, epsilon = 1e-14);
        assert_eq!(m[0][1], m[1][0]);
    }

    #[test]
    fn single_species_limit_collapses_all_closures() {
        let rho_r = 0.37;
        let mf = mobility_matrix(&params(1.0, 1.0, MobilityModel::MeanField), rho_r, 0.0).unwrap();
        for model in [
            MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Standard },
            MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Spd },
            MobilityModel::CompositeQuastel,
        ] {
            let m = mobility_matrix(&params(1.0, 1.0, model), rho_r, 0.0).unwrap();
            assert_abs_diff_eq!(m[0][0], mf[0][0], epsilon = 1e-14);
            assert_abs_diff_eq!(m[0][1], 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(m[1][1], 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn composite_quastel_vanishes_at_vacuum_and_jam() {
        let p = params(2.0, 2.0, MobilityModel::CompositeQuastel);
        for (r, b) in [(0.0, 0.0), (0.5, 0.5), (1.0, 0.0)] {
            let m = mobility_matrix(&p, r, b).unwrap();
            if r + b == 0.0 || r + b == 1.0 {
                if r + b == 0.0 {
                    assert_eq!(m, [[0.0; 2]; 2]);
                } else {
                    // jammed: hole factor and tracer coefficient both vanish
                    assert_abs_diff_eq!(m[0][0], 0.0, epsilon = 1e-14);
                    assert_abs_diff_eq!(m[0][1], 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn composite_quastel_rejects_unequal_diffusivities() {
        let p = params(1.5, 0.5, MobilityModel::CompositeQuastel);
        assert!(matches!(
            mobility_matrix(&p, 0.1, 0.1),
            Err(ContinuumError::ModelMismatch { .. })
        ));
    }

    #[test]
    fn density_guards() {
        let p = params(1.0, 1.0, MobilityModel::MeanField);
        assert!(mobility_matrix(&p, -0.1, 0.2).is_err());
        assert!(mobility_matrix(&p, 0.7, 0.7).is_err());
    }

    #[test]
    fn equal_diffusivities_stay_positive_semidefinite() {
        for model in [
            MobilityModel::MeanField,
            MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Standard },
            MobilityModel::CompositeQuastel,
        ] {
            let report = check_spd(&params(1.0, 1.0, model), 0.01).unwrap();
            assert!(
                report.is_positive_semidefinite,
                "{model:?} min eig {} at ({}, {})",
                report.min_eigenvalue, report.at_rho_r, report.at_rho_b
            );
        }
    }

    #[test]
    fn extreme_diffusivity_ratio_breaks_matched_low_density() {
        // ratio 10 lies outside the interval of ratios with a positive
        // semidefinite drag correction; the most negative eigenvalue sits in
        // the dense, strongly asymmetric corner
        let p = params(10.0, 1.0, MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Standard });
        let report = check_spd(&p, 0.01).unwrap();
        assert!(!report.is_positive_semidefinite);
        assert!(report.min_eigenvalue < -1e-6, "min eig {}", report.min_eigenvalue);
        assert!(report.at_rho_r + report.at_rho_b > 0.9);
        // moderate ratios inside the interval remain fine
        let ok = check_spd(
            &params(2.0, 1.0, MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Standard }),
            0.01,
        )
        .unwrap();
        assert!(ok.is_positive_semidefinite, "ratio 2 min eig {}", ok.min_eigenvalue);
        // the damped variant repairs the extreme ratio
        let spd = check_spd(
            &params(10.0, 1.0, MobilityModel::MatchedLowDensity { mu_variant: MuVariant::Spd }),
            0.01,
        )
        .unwrap();
        assert!(spd.is_positive_semidefinite, "damped min eig {}", spd.min_eigenvalue);
    }

    #[test]
    fn free_energy_reference_value() {
        let geom = LatticeGeometry::new(2, 10).unwrap();
        let p = params(1.0, 1.0, MobilityModel::MeanField);
        let f = DensityFields::uniform(geom, 0.25, 0.25);
        assert_abs_diff_eq!(free_energy(&f, &p).unwrap(), -1.0397207708399179, epsilon = 1e-13);
        // saturated red phase: every entropy term vanishes
        let full = DensityFields::uniform(geom, 1.0, 0.0);
        assert_abs_diff_eq!(free_energy(&full, &p).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn opposite_potentials_cancel_in_energy_of_symmetric_state() {
        let geom = LatticeGeometry::new(2, 16).unwrap();
        let mut p = params(1.0, 1.0, MobilityModel::MeanField);
        p.species[0].potential = PotentialSpec::Sinusoidal { amplitude: 1.0, wavevector: [1, 0, 0] };
        p.species[1].potential =
            PotentialSpec::Sinusoidal { amplitude: -1.0, wavevector: [1, 0, 0] };
        let f = DensityFields::uniform(geom, 0.25, 0.25);
        let flat = params(1.0, 1.0, MobilityModel::MeanField);
        assert_abs_diff_eq!(
            free_energy(&f, &p).unwrap(),
            free_energy(&f, &flat).unwrap(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn init_mode_profiles_match_stochastic_masses() {
        let geom = LatticeGeometry::new(2, 50).unwrap();
        let mode = InitMode::AxisBlocks { phi: 0.5, axis: 0, split: 0.5 };
        let f = DensityFields::from_init_mode(geom, &mode).unwrap();
        // exactly half the sites are red-block; mass = phi * (1/2) * |torus|
        assert_abs_diff_eq!(f.mass(&f.red), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(f.mass(&f.blue), 0.25, epsilon = 1e-12);
        let u = DensityFields::from_init_mode(
            geom,
            &InitMode::FixedCountUniform { n_red: 500, n_blue: 250 },
        )
        .unwrap();
        assert_abs_diff_eq!(u.red[0], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(u.blue[0], 0.1, epsilon = 1e-15);
    }
}
