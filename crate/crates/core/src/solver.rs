//! Explicit finite-volume solver for the cross-diffusion system on the
//! periodic grid.
//!
//! Fluxes live on edges. Across the edge from cell `s` to its forward
//! neighbour `t` along axis `k`, with arithmetic midpoint densities
//! `rb_s = (rho_s(s) + rho_s(t)) / 2`, the solver forms hole-safe gradient
//! combinations
//!
//! ```text
//! G_s = (rho_s(t) - rho_s(s)) / h
//! H   = (rho(t) - rho(s)) / (h (1 - rb))
//! W_s = G_s + rb_s (H + dV_s)           // = rho_s * d(chemical potential)
//! ```
//!
//! and the per-model edge flux is algebraically identical to
//! `M(rho) grad(dE/drho)` but arranged so no division by a vanishing density
//! occurs. Cell updates telescope the edge fluxes, so both masses are
//! conserved to rounding. Forward Euler with `dt = cfl h^2 / max(D)` is
//! stable for `cfl <= 1/2` in the diffusion-dominated regimes treated here;
//! the default is 0.2.
//!
//! Densities are clamped back to `[0, 1]` only inside a hair-width overshoot
//! band; anything beyond the band aborts with an instability error rather
//! than silently flattening the fields.

use crate::coefficients::{self, MuVariant, SelfDiffusionModel};
use crate::continuum::{free_energy, ContinuumError, ContinuumParams, DensityFields, MobilityModel};
use crate::lattice::{LatticeGeometry, NeighborTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overshoot beyond `[0, 1]` tolerated (and clamped) before declaring the
/// scheme unstable.
pub const OVERSHOOT_BAND: f64 = 1e-8;

#[derive(Error, Debug)]
pub enum SolverError {
    #[error("cfl must lie in (0, 1/2], got {0}")]
    BadCfl(f64),
    #[error("densities left the admissible band at t = {time}, site {site}: rho_r = {rho_r}, rho_b = {rho_b}")]
    Instability { time: f64, site: usize, rho_r: f64, rho_b: f64 },
    #[error("no steady state within t = {elapsed}: residual {residual:e} above {tol:e}")]
    MaxTimeExceeded { elapsed: f64, residual: f64, tol: f64 },
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error("{0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PdeStats {
    pub steps: u64,
    /// Density components nudged back into `[0, 1]` (each within the
    /// overshoot band).
    pub clamped: u64,
    /// Largest excursion beyond `[0, 1]` seen before clamping.
    pub max_overshoot: f64,
}

/// Time horizon and sampling instants, mirroring the stochastic runner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PdeRunConfig {
    pub t_end: f64,
    /// Strictly ascending, within `[0, t_end]`; steps are shortened to land
    /// on each instant exactly.
    pub snapshot_times: Vec<f64>,
}

impl PdeRunConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(SolverError::BadConfig(format!(
                "t_end must be positive and finite, got {}",
                self.t_end
            )));
        }
        let mut prev = -1.0;
        for &s in &self.snapshot_times {
            if !(s.is_finite() && (0.0..=self.t_end).contains(&s)) {
                return Err(SolverError::BadConfig(format!(
                    "snapshot time {s} outside [0, {}]",
                    self.t_end
                )));
            }
            if s <= prev {
                return Err(SolverError::BadConfig(
                    "snapshot times must be strictly ascending".into(),
                ));
            }
            prev = s;
        }
        Ok(())
    }
}

pub struct PdeRun {
    pub snapshots: Vec<DensityFields>,
    pub stats: PdeStats,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SteadyReport {
    /// Simulated time at which the residual dropped below tolerance.
    pub time: f64,
    /// Final sup-norm rate of change `max |drho/dt|`.
    pub residual: f64,
}

pub struct PdeSolver {
    pub params: ContinuumParams,
    cfl: f64,
    neighbors: NeighborTable,
    geom: LatticeGeometry,
    /// Forward potential differences `(V(t) - V(s)) / h` per species and axis.
    dv: [Vec<Vec<f64>>; 2],
    flux: [Vec<f64>; 2],
    delta: [Vec<f64>; 2],
    pub stats: PdeStats,
}

impl PdeSolver {
    pub fn new(
        geom: LatticeGeometry,
        params: ContinuumParams,
        cfl: f64,
    ) -> Result<Self, SolverError> {
        if !(cfl > 0.0 && cfl <= 0.5) {
            return Err(SolverError::BadCfl(cfl));
        }
        if params.model == MobilityModel::CompositeQuastel && params.d_red() != params.d_blue() {
            return Err(ContinuumError::ModelMismatch {
                requirement: "equal diffusivities",
                d_r: params.d_red(),
                d_b: params.d_blue(),
            }
            .into());
        }
        let neighbors = NeighborTable::build(&geom);
        let h = geom.spacing();
        let n = geom.n_sites();
        let mut dv: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for (sp, dv_sp) in dv.iter_mut().enumerate() {
            let v = params.species[sp].potential.field(&geom).map_err(ContinuumError::from)?;
            *dv_sp = (0..geom.dim())
                .map(|k| {
                    (0..n).map(|s| (v[neighbors.forward(s, k)] - v[s]) / h).collect()
                })
                .collect();
        }
        Ok(PdeSolver {
            params,
            cfl,
            neighbors,
            geom,
            dv,
            flux: [vec![0.0; n], vec![0.0; n]],
            delta: [vec![0.0; n], vec![0.0; n]],
            stats: PdeStats::default(),
        })
    }

    /// Stable step size `cfl h^2 / max(D_r, D_b)`.
    pub fn dt(&self) -> f64 {
        self.cfl * self.geom.spacing().powi(2) / self.params.d_red().max(self.params.d_blue())
    }

    /// One forward-Euler step of size `dt`.
    pub fn step(&mut self, fields: &mut DensityFields, dt: f64) -> Result<(), SolverError> {
        assert_eq!(fields.geom, self.geom, "fields built for a different grid");
        let n = self.geom.n_sites();
        let h = self.geom.spacing();
        let (d_r, d_b) = (self.params.d_red(), self.params.d_blue());
        let alpha = self.params.alpha;
        let (gam_rb, gam_br) = (
            coefficients::gamma(d_r, d_b),
            coefficients::gamma(d_b, d_r),
        );

        self.delta[0].fill(0.0);
        self.delta[1].fill(0.0);
        for k in 0..self.geom.dim() {
            for s in 0..n {
                let t = self.neighbors.forward(s, k);
                let (r0, r1) = (fields.red[s], fields.red[t]);
                let (b0, b1) = (fields.blue[s], fields.blue[t]);
                let rb_r = 0.5 * (r0 + r1);
                let rb_b = 0.5 * (b0 + b1);
                let rho = rb_r + rb_b;
                let hole = (1.0 - rho).max(1e-12);
                let g_r = (r1 - r0) / h;
                let g_b = (b1 - b0) / h;
                let hgrad = (r1 + b1 - r0 - b0) / (h * hole);
                let w_r = g_r + rb_r * (hgrad + self.dv[0][k][s]);
                let w_b = g_b + rb_b * (hgrad + self.dv[1][k][s]);
                let (f_r, f_b) = match self.params.model {
                    MobilityModel::MeanField => {
                        ((1.0 - rho) * d_r * w_r, (1.0 - rho) * d_b * w_b)
                    }
                    MobilityModel::MatchedLowDensity { mu_variant } => {
                        let damp = match mu_variant {
                            MuVariant::Standard => 1.0,
                            MuVariant::Spd => 1.0 - rho,
                        };
                        let f_r = (1.0 - rho)
                            * d_r
                            * (w_r - alpha * damp * (gam_rb * rb_b * w_r - gam_br * rb_r * w_b));
                        let f_b = (1.0 - rho)
                            * d_b
                            * (w_b - alpha * damp * (gam_br * rb_r * w_b - gam_rb * rb_b * w_r));
                        (f_r, f_b)
                    }
                    MobilityModel::CompositeQuastel => {
                        let ds = coefficients::self_diffusion_unit(
                            SelfDiffusionModel::Composite,
                            alpha,
                            rho.clamp(0.0, 1.0),
                        );
                        let denom = rho.max(1e-12);
                        let f_r = d_r
                            * ((1.0 - rho) * rb_r * (w_r + w_b) + ds * (rb_b * w_r - rb_r * w_b))
                            / denom;
                        let f_b = d_r
                            * ((1.0 - rho) * rb_b * (w_r + w_b) + ds * (rb_r * w_b - rb_b * w_r))
                            / denom;
                        (f_r, f_b)
                    }
                };
                self.flux[0][s] = f_r;
                self.flux[1][s] = f_b;
            }
            let scale = dt / h;
            for sp in 0..2 {
                for s in 0..n {
                    let back = self.neighbors.backward(s, k);
                    self.delta[sp][s] += scale * (self.flux[sp][s] - self.flux[sp][back]);
                }
            }
        }

        for s in 0..n {
            let r = fields.red[s] + self.delta[0][s];
            let b = fields.blue[s] + self.delta[1][s];
            let lo = -OVERSHOOT_BAND;
            let hi = 1.0 + OVERSHOOT_BAND;
            if !(lo..=hi).contains(&r) || !(lo..=hi).contains(&b) || r + b > hi {
                return Err(SolverError::Instability {
                    time: fields.time + dt,
                    site: s,
                    rho_r: r,
                    rho_b: b,
                });
            }
            let mut r2 = r;
            let mut b2 = b;
            for v in [&mut r2, &mut b2] {
                if !(0.0..=1.0).contains(v) {
                    let excess = if *v < 0.0 { -*v } else { *v - 1.0 };
                    self.stats.max_overshoot = self.stats.max_overshoot.max(excess);
                    self.stats.clamped += 1;
                    *v = v.clamp(0.0, 1.0);
                }
            }
            if r2 + b2 > 1.0 {
                let scale = 1.0 / (r2 + b2);
                self.stats.max_overshoot = self.stats.max_overshoot.max(r2 + b2 - 1.0);
                self.stats.clamped += 1;
                r2 *= scale;
                b2 *= scale;
            }
            fields.red[s] = r2;
            fields.blue[s] = b2;
        }
        fields.time += dt;
        self.stats.steps += 1;
        Ok(())
    }

    /// Integrate to `cfg.t_end`, landing exactly on every snapshot instant.
    pub fn run(
        &mut self,
        fields: &mut DensityFields,
        cfg: &PdeRunConfig,
    ) -> Result<PdeRun, SolverError> {
        cfg.validate()?;
        let dt = self.dt();
        let mut snapshots = Vec::with_capacity(cfg.snapshot_times.len());
        let mut next_snap = 0;
        loop {
            while next_snap < cfg.snapshot_times.len()
                && fields.time >= cfg.snapshot_times[next_snap] - 1e-12 * cfg.t_end.max(1.0)
            {
                let mut snap = fields.clone();
                snap.time = cfg.snapshot_times[next_snap];
                snapshots.push(snap);
                next_snap += 1;
            }
            let remaining = cfg.t_end - fields.time;
            if remaining <= 1e-12 * cfg.t_end {
                break;
            }
            let mut step_dt = dt.min(remaining);
            if next_snap < cfg.snapshot_times.len() {
                step_dt = step_dt.min(cfg.snapshot_times[next_snap] - fields.time);
            }
            self.step(fields, step_dt)?;
        }
        Ok(PdeRun { snapshots, stats: self.stats })
    }

    /// Integrate until the sup-norm rate of change drops below `tol`
    /// (per unit time), or fail once `max_time` is exceeded. The fields carry
    /// the last iterate in either case.
    pub fn steady_state(
        &mut self,
        fields: &mut DensityFields,
        tol: f64,
        max_time: f64,
    ) -> Result<SteadyReport, SolverError> {
        let dt = self.dt();
        let mut residual = f64::INFINITY;
        while fields.time < max_time {
            let before: (Vec<f64>, Vec<f64>) = (fields.red.clone(), fields.blue.clone());
            self.step(fields, dt)?;
            residual = before
                .0
                .iter()
                .zip(&fields.red)
                .chain(before.1.iter().zip(&fields.blue))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                / dt;
            if residual < tol {
                return Ok(SteadyReport { time: fields.time, residual });
            }
        }
        Err(SolverError::MaxTimeExceeded { elapsed: fields.time, residual, tol })
    }

    /// Convenience: free energy of the current fields under this solver's
    /// parameters.
    pub fn energy(&self, fields: &DensityFields) -> Result<f64, SolverError> {
        Ok(free_energy(fields, &self.params)?)
    }
}
