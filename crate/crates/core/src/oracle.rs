//! Exact distributions for small systems by direct generator enumeration.
//!
//! For lattices of at most 64 sites and modest particle counts, every
//! configuration with the given species counts is enumerated as a pair of
//! occupancy bitmasks and the full jump-rate matrix is assembled. This gives
//! reference answers that the stochastic simulation can be tested against:
//!
//! * the stationary law, either in closed form (product of `exp(-V)` site
//!   weights, which is stationary because hop rates are reversible) or by
//!   power iteration on the uniformized transition matrix;
//! * the distribution at any finite time, by the uniformization series
//!   `p(t) = sum_k Pois(k; L t) p0 P^k`, evaluated with log-space Poisson
//!   weights so large `L t` cannot underflow;
//! * per-site occupancy marginals of either species.
//!
//! Everything is dense in the number of configurations but sparse per row, so
//! the practical limit is the configuration count, guarded by [`MAX_CONFIGS`].

use crate::lattice::{LatticeGeometry, LatticeState, NeighborTable, Species, SpeciesParams};
use std::collections::HashMap;
use thiserror::Error;

pub const MAX_CONFIGS: u64 = 100_000;

#[derive(Error, Debug)]
pub enum OracleError {
    #[error("exact enumeration needs <= 64 sites, lattice has {0}")]
    TooManySites(usize),
    #[error("{0} configurations exceed the enumeration cap {MAX_CONFIGS}")]
    TooManyConfigs(u64),
    #[error("power iteration did not reach tolerance {tol:e} in {iters} sweeps")]
    NotConverged { tol: f64, iters: usize },
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
}

/// The exclusion process restricted to fixed particle counts, as an explicit
/// finite-state Markov chain.
pub struct ExactChain {
    pub geom: LatticeGeometry,
    configs: Vec<(u64, u64)>,
    index: HashMap<(u64, u64), u32>,
    /// Out-edges `(target config, rate)` per config.
    rows: Vec<Vec<(u32, f64)>>,
    /// Total exit rate per config.
    exit: Vec<f64>,
    /// Uniformization constant, slightly above the largest exit rate.
    lambda: f64,
    /// Site potentials per species (for the closed-form stationary law).
    potentials: [Vec<f64>; 2],
}

fn binomial_capped(n: u64, k: u64, cap: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > 4 * cap as u128 {
            return u64::MAX;
        }
    }
    acc.min(u64::MAX as u128) as u64
}

/// All `k`-subsets of `0..n` in lexicographic order, as bitmasks.
fn enumerate_masks(n: usize, k: usize, forbidden: u64, out: &mut Vec<u64>) {
    fn rec(n: usize, k: usize, start: usize, forbidden: u64, acc: u64, out: &mut Vec<u64>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for s in start..=n - k {
            let bit = 1u64 << s;
            if forbidden & bit == 0 {
                rec(n, k - 1, s + 1, forbidden, acc | bit, out);
            }
        }
    }
    if k == 0 {
        out.push(0);
    } else if k <= n {
        rec(n, k, 0, forbidden, 0, out);
    }
}

impl ExactChain {
    pub fn build(
        geom: LatticeGeometry,
        params: &[SpeciesParams; 2],
        n_red: usize,
        n_blue: usize,
    ) -> Result<Self, OracleError> {
        let n = geom.n_sites();
        if n > 64 {
            return Err(OracleError::TooManySites(n));
        }
        let count = binomial_capped(n as u64, n_red as u64, MAX_CONFIGS)
            .saturating_mul(binomial_capped((n - n_red) as u64, n_blue as u64, MAX_CONFIGS));
        if count > MAX_CONFIGS {
            return Err(OracleError::TooManyConfigs(count));
        }

        let mut red_masks = Vec::new();
        enumerate_masks(n, n_red, 0, &mut red_masks);
        let mut configs = Vec::with_capacity(count as usize);
        for &r in &red_masks {
            let mut blue_masks = Vec::new();
            let free = n - n_red;
            if n_blue <= free {
                // enumerate blue among sites not taken by red
                let mut candidates: Vec<u64> = Vec::new();
                enumerate_masks(n, n_blue, r, &mut candidates);
                blue_masks = candidates;
            }
            for b in blue_masks {
                configs.push((r, b));
            }
        }
        let index: HashMap<(u64, u64), u32> =
            configs.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();

        let neighbors = NeighborTable::build(&geom);
        let two_d = 2 * geom.dim();
        let h2_inv = 1.0 / (geom.spacing() * geom.spacing());
        let mut potentials = [Vec::new(), Vec::new()];
        let mut rate_cache: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for sp in 0..2 {
            let v = params[sp].potential.field(&geom)?;
            let mut cache = vec![0.0; n * two_d];
            for site in 0..n {
                for dir in 0..two_d {
                    let t = neighbors.step(site, dir);
                    cache[site * two_d + dir] =
                        params[sp].d_coef * h2_inv * (0.5 * (v[site] - v[t])).exp();
                }
            }
            potentials[sp] = v;
            rate_cache[sp] = cache;
        }

        let mut rows = Vec::with_capacity(configs.len());
        let mut exit = Vec::with_capacity(configs.len());
        for &(r, b) in &configs {
            let occupied = r | b;
            let mut row: Vec<(u32, f64)> = Vec::new();
            let mut total = 0.0;
            for (mask, sp) in [(r, 0usize), (b, 1usize)] {
                let mut bits = mask;
                while bits != 0 {
                    let site = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for dir in 0..two_d {
                        let target = neighbors.step(site, dir);
                        if occupied & (1u64 << target) != 0 {
                            continue;
                        }
                        let rate = rate_cache[sp][site * two_d + dir];
                        let moved = (mask & !(1u64 << site)) | (1u64 << target);
                        let next = if sp == 0 { (moved, b) } else { (r, moved) };
                        row.push((index[&next], rate));
                        total += rate;
                    }
                }
            }
            rows.push(row);
            exit.push(total);
        }
        let lambda = 1.05 * exit.iter().cloned().fold(0.0f64, f64::max);
        Ok(ExactChain { geom, configs, index, rows, exit, lambda, potentials })
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn config(&self, i: usize) -> (u64, u64) {
        self.configs[i]
    }

    /// Index of the configuration occupied by `state`, if its counts match.
    pub fn config_index(&self, state: &LatticeState) -> Option<usize> {
        let mut r = 0u64;
        let mut b = 0u64;
        for p in &state.particles {
            let bit = 1u64 << p.site;
            match p.species {
                Species::Red => r |= bit,
                Species::Blue => b |= bit,
            }
        }
        self.index.get(&(r, b)).map(|&i| i as usize)
    }

    /// One application of the uniformized transition matrix `P = I + Q / L`.
    fn apply_p(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = v[j] * (1.0 - self.exit[j] / self.lambda);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let w = v[i] / self.lambda;
            if w == 0.0 {
                continue;
            }
            for &(j, rate) in row {
                out[j as usize] += w * rate;
            }
        }
    }

    /// Closed-form stationary law: product of `exp(-V_s(x))` over occupied
    /// sites, normalized over the enumerated configurations.
    pub fn boltzmann_stationary(&self) -> Vec<f64> {
        let mut weights: Vec<f64> = self
            .configs
            .iter()
            .map(|&(r, b)| {
                let mut e = 0.0;
                for (mask, sp) in [(r, 0usize), (b, 1)] {
                    let mut bits = mask;
                    while bits != 0 {
                        let site = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        e += self.potentials[sp][site];
                    }
                }
                (-e).exp()
            })
            .collect();
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);
        weights
    }

    /// Stationary law by power iteration on `P`, to sup-norm tolerance `tol`.
    pub fn stationary_power_iteration(
        &self,
        tol: f64,
        max_iters: usize,
    ) -> Result<Vec<f64>, OracleError> {
        let n = self.n_configs();
        let mut v = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..max_iters {
            self.apply_p(&v, &mut next);
            let diff = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
            std::mem::swap(&mut v, &mut next);
            if diff < tol {
                let z: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= z);
                return Ok(v);
            }
        }
        Err(OracleError::NotConverged { tol, iters: max_iters })
    }

    /// Distribution at time `t` from initial distribution `p0`, by the
    /// uniformization series with log-space Poisson weights.
    pub fn distribution_at(&self, p0: &[f64], t: f64) -> Vec<f64> {
        assert_eq!(p0.len(), self.n_configs());
        assert!(t >= 0.0);
        if t == 0.0 {
            return p0.to_vec();
        }
        let lt = self.lambda * t;
        let k_max = (lt + 10.0 * lt.sqrt() + 30.0).ceil() as usize;
        let mut v = p0.to_vec();
        let mut next = vec![0.0; v.len()];
        let mut result = vec![0.0; v.len()];
        let mut ln_w = -lt; // ln Pois(0; lt)
        let mut weight_sum = 0.0;
        for k in 0..=k_max {
            if ln_w > -700.0 {
                let w = ln_w.exp();
                weight_sum += w;
                for (r, &x) in result.iter_mut().zip(&v) {
                    *r += w * x;
                }
            } else if (k as f64) > lt {
                break; // past the mode and already negligible
            }
            self.apply_p(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
            ln_w += lt.ln() - ((k + 1) as f64).ln();
        }
        // compensate the truncated Poisson tail so probabilities sum to one
        result.iter_mut().for_each(|x| *x /= weight_sum);
        result
    }

    /// Unit mass on one configuration.
    pub fn delta(&self, config_idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n_configs()];
        p[config_idx] = 1.0;
        p
    }

    /// Per-site occupancy probabilities of one species under `p`.
    pub fn occupancy_marginal(&self, p: &[f64], species: Species) -> Vec<f64> {
        let mut m = vec![0.0; self.geom.n_sites()];
        for (i, &(r, b)) in self.configs.iter().enumerate() {
            let mask = match species {
                Species::Red => r,
                Species::Blue => b,
            };
            let mut bits = mask;
            while bits != 0 {
                let site = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                m[site] += p[i];
            }
        }
        m
    }
}

/// Total variation distance between two distributions on the same index set.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
