//! Rejection-style kinetic Monte Carlo for the two-species exclusion process.
//!
//! Each particle proposes hops to its `2d` neighbours with rates
//! `(D_s / h^2) exp([V_s(x) - V_s(y)] / 2)`; proposals onto occupied sites are
//! rejected but still consume an exponential waiting time, so the clock of the
//! embedded jump process is exact. Rates never depend on the occupancy, which
//! keeps proposal bookkeeping cheap: a hop changes only the mover's own `2d`
//! proposal channels.
//!
//! The ratio of forward and backward rates across an edge telescopes to
//! `exp(V(x) - V(y))`, so the dynamics is reversible with respect to the
//! product measure weighted by `exp(-sum_s V_s(x) eta_s(x))` restricted to the
//! exclusion constraint.
//!
//! All times are macroscopic (diffusive scale): the `1/h^2` in the rates is
//! included, so observables at time `t` correspond to lattice time `t / h^2`.

use crate::lattice::{LatticeState, NeighborTable, SpeciesParams};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum KmcError {
    #[error("cannot run kinetic Monte Carlo with no particles")]
    EmptySystem,
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
}

/// Flat binary sum tree over non-negative leaf weights.
///
/// `O(log n)` single-leaf updates and weighted sampling by cumulative-sum
/// descent. Leaves are padded to a power of two; padding weighs zero and is
/// unreachable for draws strictly below the total.
#[derive(Clone, Debug)]
pub struct SumTree {
    size: usize,
    n: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: &[f64]) -> Self {
        let n = leaves.len();
        let size = n.next_power_of_two().max(1);
        let mut tree = SumTree { size, n, nodes: vec![0.0; 2 * size] };
        tree.rebuild(leaves);
        tree
    }

    /// Refill every leaf and recompute all internal sums.
    pub fn rebuild(&mut self, leaves: &[f64]) {
        assert_eq!(leaves.len(), self.n);
        self.nodes[self.size..self.size + self.n].copy_from_slice(leaves);
        self.nodes[self.size + self.n..].fill(0.0);
        for k in (1..self.size).rev() {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        assert!(i < self.n);
        self.nodes[self.size + i]
    }

    pub fn update(&mut self, i: usize, value: f64) {
        assert!(i < self.n);
        debug_assert!(value >= 0.0);
        let mut k = self.size + i;
        self.nodes[k] = value;
        k >>= 1;
        while k >= 1 {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            k >>= 1;
        }
    }

    /// Leaf index whose cumulative-weight interval contains `r in [0, total)`.
    pub fn sample(&self, mut r: f64) -> usize {
        let mut node = 1;
        while node < self.size {
            node <<= 1;
            let left = self.nodes[node];
            if r >= left {
                r -= left;
                node += 1;
            }
        }
        (node - self.size).min(self.n.saturating_sub(1))
    }
}

/// How hop proposals are drawn.
enum ProposalTable {
    /// Every channel carries the same rate (no potentials, equal
    /// diffusivities): draw a channel uniformly.
    Uniform { channel_rate: f64 },
    /// General case: weighted sampling from a sum tree. `dynamic` is false
    /// when rates are position-independent and leaves never need updating.
    Tree { tree: SumTree, dynamic: bool },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmcStats {
    /// Proposed events (accepted + blocked).
    pub events: u64,
    pub accepted: u64,
    pub blocked: u64,
    pub rebuilds: u64,
}

/// Outcome of a single proposal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Hop { particle: u32, from: u32, to: u32 },
    Blocked { particle: u32, target: u32 },
}

/// Default number of accepted/blocked events between full sum-tree rebuilds
/// (guards against floating-point drift in the incremental sums).
pub const REBUILD_PERIOD: u64 = 1_000_000;

pub struct KmcEngine {
    pub state: LatticeState,
    neighbors: NeighborTable,
    /// Per species: proposal rate for each `(site, direction)` pair,
    /// `rate_cache[s][site * 2d + dir]`. Independent of occupancy.
    rate_cache: [Vec<f64>; 2],
    table: ProposalTable,
    two_d: usize,
    rebuild_period: u64,
    events_since_rebuild: u64,
    pub stats: KmcStats,
}

impl KmcEngine {
    pub fn new(state: LatticeState, params: &[SpeciesParams; 2]) -> Result<Self, KmcError> {
        if state.particles.is_empty() {
            return Err(KmcError::EmptySystem);
        }
        let geom = state.geom;
        let neighbors = NeighborTable::build(&geom);
        let d = geom.dim();
        let two_d = 2 * d;
        let h2_inv = 1.0 / (geom.spacing() * geom.spacing());

        let mut rate_cache: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for sp in 0..2 {
            let v = params[sp].potential.field(&geom)?;
            let mut cache = vec![0.0; geom.n_sites() * two_d];
            for site in 0..geom.n_sites() {
                for dir in 0..two_d {
                    let target = neighbors.step(site, dir);
                    cache[site * two_d + dir] =
                        params[sp].d_coef * h2_inv * (0.5 * (v[site] - v[target])).exp();
                }
            }
            rate_cache[sp] = cache;
        }

        let flat_potentials =
            params[0].potential.is_zero() && params[1].potential.is_zero();
        let equal_d = params[0].d_coef == params[1].d_coef;
        let table = if flat_potentials && equal_d {
            ProposalTable::Uniform { channel_rate: params[0].d_coef * h2_inv }
        } else {
            let leaves: Vec<f64> = state
                .particles
                .iter()
                .flat_map(|p| {
                    let base = p.site as usize * two_d;
                    let cache = &rate_cache[p.species.index()];
                    (0..two_d).map(move |dir| cache[base + dir])
                })
                .collect();
            ProposalTable::Tree { tree: SumTree::new(&leaves), dynamic: !flat_potentials }
        };

        Ok(KmcEngine {
            state,
            neighbors,
            rate_cache,
            table,
            two_d,
            rebuild_period: REBUILD_PERIOD,
            events_since_rebuild: 0,
            stats: KmcStats::default(),
        })
    }

    /// True when proposals are drawn uniformly (flat potentials, equal
    /// diffusivities) rather than through the weighted tree.
    pub fn uses_uniform_sampling(&self) -> bool {
        matches!(self.table, ProposalTable::Uniform { .. })
    }

    /// Override the drift-guard rebuild interval (mainly for tests/benches).
    pub fn set_rebuild_period(&mut self, period: u64) {
        assert!(period > 0);
        self.rebuild_period = period;
    }

    /// Sum of all proposal rates; the exponential clock parameter.
    pub fn total_rate(&self) -> f64 {
        match &self.table {
            ProposalTable::Uniform { channel_rate } => {
                channel_rate * (self.state.n_particles() * self.two_d) as f64
            }
            ProposalTable::Tree { tree, .. } => tree.total(),
        }
    }

    fn draw_channel<R: Rng>(&self, rng: &mut R) -> usize {
        match &self.table {
            ProposalTable::Uniform { .. } => {
                rng.random_range(0..self.state.n_particles() * self.two_d)
            }
            ProposalTable::Tree { tree, .. } => tree.sample(rng.random::<f64>() * tree.total()),
        }
    }

    fn apply_channel(&mut self, channel: usize) -> StepOutcome {
        let pid = (channel / self.two_d) as u32;
        let dir = channel % self.two_d;
        let p = self.state.particles[pid as usize];
        let from = p.site;
        let target = self.neighbors.step(from as usize, dir);
        self.stats.events += 1;
        self.events_since_rebuild += 1;
        let outcome = if self.state.is_occupied(target) {
            self.stats.blocked += 1;
            StepOutcome::Blocked { particle: pid, target: target as u32 }
        } else {
            let axis = dir >> 1;
            let sign = if dir & 1 == 0 { 1 } else { -1 };
            self.state.execute_hop(pid, target, axis, sign);
            if let ProposalTable::Tree { tree, dynamic: true } = &mut self.table {
                let cache = &self.rate_cache[p.species.index()];
                let base = target * self.two_d;
                for d in 0..self.two_d {
                    tree.update(pid as usize * self.two_d + d, cache[base + d]);
                }
            }
            self.stats.accepted += 1;
            StepOutcome::Hop { particle: pid, from, to: target as u32 }
        };
        if self.events_since_rebuild >= self.rebuild_period {
            self.rebuild_table();
        }
        outcome
    }

    fn rebuild_table(&mut self) {
        self.events_since_rebuild = 0;
        if let ProposalTable::Tree { tree, .. } = &mut self.table {
            let leaves: Vec<f64> = self
                .state
                .particles
                .iter()
                .flat_map(|p| {
                    let base = p.site as usize * self.two_d;
                    let cache = &self.rate_cache[p.species.index()];
                    (0..self.two_d).map(move |dir| cache[base + dir])
                })
                .collect();
            tree.rebuild(&leaves);
            self.stats.rebuilds += 1;
        }
    }

    /// One waiting time + one proposal. Advances the clock whether or not the
    /// proposal is blocked.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> (f64, StepOutcome) {
        let dt = self.sample_dt(rng);
        let channel = self.draw_channel(rng);
        let outcome = self.apply_channel(channel);
        self.state.time += dt;
        (dt, outcome)
    }

    fn sample_dt<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        -(1.0 - u).ln() / self.total_rate()
    }

    /// Proposal rate of one `(site, direction)` channel for a species
    /// (exposed for reversibility checks).
    pub fn channel_rate(&self, species: crate::lattice::Species, site: usize, dir: usize) -> f64 {
        self.rate_cache[species.index()][site * self.two_d + dir]
    }
}

/// Horizon and sampling instants for one realization, in macroscopic time.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KmcRunConfig {
    pub t_end: f64,
    /// Strictly ascending, within `[0, t_end]`. The configuration recorded at
    /// `s` is the exact state of the jump process at that instant (the state
    /// held just before the first event past `s`).
    pub snapshot_times: Vec<f64>,
}

impl KmcRunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        let mut prev = -1.0;
        for &s in &self.snapshot_times {
            if !(s.is_finite() && (0.0..=self.t_end).contains(&s)) {
                return Err(format!("snapshot time {s} outside [0, {}]", self.t_end));
            }
            if s <= prev {
                return Err("snapshot times must be strictly ascending".into());
            }
            prev = s;
        }
        Ok(())
    }
}

/// States sampled along one trajectory plus the state at the horizon.
pub struct KmcRun {
    pub snapshots: Vec<LatticeState>,
    pub final_state: LatticeState,
    pub stats: KmcStats,
}

/// Drive one engine to `t_end`, recording the exact process state at each
/// requested instant.
pub fn run_realization<R: Rng>(
    engine: &mut KmcEngine,
    cfg: &KmcRunConfig,
    rng: &mut R,
) -> Result<KmcRun, KmcError> {
    cfg.validate().map_err(crate::lattice::LatticeError::InconsistentState)?;
    let mut snapshots = Vec::with_capacity(cfg.snapshot_times.len());
    let mut next_snap = 0;
    loop {
        let dt = engine.sample_dt(rng);
        let t_next = engine.state.time + dt;
        while next_snap < cfg.snapshot_times.len() && cfg.snapshot_times[next_snap] <= t_next {
            let mut snap = engine.state.clone();
            snap.time = cfg.snapshot_times[next_snap];
            snapshots.push(snap);
            next_snap += 1;
        }
        if t_next >= cfg.t_end {
            engine.state.time = cfg.t_end;
            break;
        }
        let channel = engine.draw_channel(rng);
        engine.apply_channel(channel);
        engine.state.time = t_next;
    }
    Ok(KmcRun {
        snapshots,
        final_state: engine.state.clone(),
        stats: engine.stats,
    })
}
