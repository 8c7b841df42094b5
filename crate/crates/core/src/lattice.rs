//! Periodic lattice geometry, on-site potentials and particle configurations.
//!
//! Sites live on the d-dimensional discrete torus `{0, .., L-1}^d` with spacing
//! `h = 1/L`; site `n` sits at the cell centre `x = h * (n + 1/2)` of the unit
//! torus. Each site holds at most one particle of either species.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Particle species. Tracer marking is a separate flag on [`Particle`];
/// a tagged particle keeps the hop parameters of its species.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Red,
    Blue,
}

impl Species {
    pub const ALL: [Species; 2] = [Species::Red, Species::Blue];

    pub fn index(self) -> usize {
        match self {
            Species::Red => 0,
            Species::Blue => 1,
        }
    }

    pub fn from_index(i: usize) -> Species {
        match i {
            0 => Species::Red,
            1 => Species::Blue,
            _ => panic!("species index out of range: {i}"),
        }
    }
}

#[derive(Error, Debug)]
pub enum LatticeError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("side length must be at least 2, got {0}")]
    BadSideLength(usize),
    #[error("lattice cannot hold {requested} particles on {sites} sites")]
    OverfullLattice { requested: usize, sites: usize },
    #[error("bad block split: {0}")]
    BadSplit(String),
    #[error("occupation probabilities p_r={p_r} + p_b={p_b} exceed 1")]
    BadOccupationProbability { p_r: f64, p_b: f64 },
    #[error("tabulated potential has {got} entries, lattice has {want} sites")]
    BadTableLength { got: usize, want: usize },
    #[error("state inconsistent: {0}")]
    InconsistentState(String),
}

/// Cubic periodic lattice: `L^d` sites, spacing `h = 1/L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    d: usize,
    l: usize,
}

impl LatticeGeometry {
    pub fn new(d: usize, l: usize) -> Result<Self, LatticeError> {
        if d != 2 && d != 3 {
            return Err(LatticeError::BadDimension(d));
        }
        if l < 2 {
            return Err(LatticeError::BadSideLength(l));
        }
        Ok(LatticeGeometry { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.l as f64
    }

    pub fn n_sites(&self) -> usize {
        self.l.pow(self.d as u32)
    }

    /// Wrap a (possibly negative or overflowing) integer coordinate onto `0..L`.
    pub fn wrap(&self, c: i64) -> usize {
        c.rem_euclid(self.l as i64) as usize
    }

    /// Linear index of integer coordinates, first axis fastest.
    /// Coordinates are wrapped, so any integer vector is accepted.
    pub fn site_index(&self, coords: [i64; 3]) -> usize {
        let mut idx = 0;
        for k in (0..self.d).rev() {
            idx = idx * self.l + self.wrap(coords[k]);
        }
        idx
    }

    /// Inverse of [`site_index`](Self::site_index); unused trailing axes are 0.
    pub fn site_coords(&self, mut idx: usize) -> [i64; 3] {
        debug_assert!(idx < self.n_sites());
        let mut c = [0i64; 3];
        for c_k in c.iter_mut().take(self.d) {
            *c_k = (idx % self.l) as i64;
            idx /= self.l;
        }
        c
    }

    /// Cell-centre position of a site on the unit torus: `h * (n + 1/2)` per axis.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.site_coords(idx);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = h * (c[k] as f64 + 0.5);
        }
        x
    }

    /// Neighbour site one step along `axis` (`dir = +1` or `-1`), periodic.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i64) -> usize {
        let mut c = self.site_coords(idx);
        c[axis] += dir;
        self.site_index(c)
    }

    /// True if the two sites are nearest neighbours on the torus.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let ca = self.site_coords(a);
        let cb = self.site_coords(b);
        let l = self.l as i64;
        let mut unit_axes = 0;
        for k in 0..self.d {
            let dist = (ca[k] - cb[k]).rem_euclid(l).min((cb[k] - ca[k]).rem_euclid(l));
            match dist {
                0 => {}
                1 => unit_axes += 1,
                _ => return false,
            }
        }
        unit_axes == 1
    }
}

/// Precomputed forward/backward neighbour tables for hot loops.
#[derive(Clone, Debug)]
pub struct NeighborTable {
    /// `fwd[site * d + axis]`, `bwd[site * d + axis]`
    fwd: Vec<u32>,
    bwd: Vec<u32>,
    d: usize,
}

impl NeighborTable {
    pub fn build(geom: &LatticeGeometry) -> Self {
        let d = geom.dim();
        let n = geom.n_sites();
        let mut fwd = vec![0u32; n * d];
        let mut bwd = vec![0u32; n * d];
        for s in 0..n {
            for k in 0..d {
                fwd[s * d + k] = geom.neighbor(s, k, 1) as u32;
                bwd[s * d + k] = geom.neighbor(s, k, -1) as u32;
            }
        }
        NeighborTable { fwd, bwd, d }
    }

    #[inline]
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        self.fwd[site * self.d + axis] as usize
    }

    #[inline]
    pub fn backward(&self, site: usize, axis: usize) -> usize {
        self.bwd[site * self.d + axis] as usize
    }

    /// Neighbour along proposal direction `dir in 0..2d`: even = forward along
    /// `dir/2`, odd = backward along `dir/2`.
    #[inline]
    pub fn step(&self, site: usize, dir: usize) -> usize {
        if dir & 1 == 0 {
            self.forward(site, dir >> 1)
        } else {
            self.backward(site, dir >> 1)
        }
    }
}

/// On-site potential `V(x)` sampled at cell centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// `V(x) = amplitude * sin(2 pi k . x)` with integer wavevector `k`.
    Sinusoidal { amplitude: f64, wavevector: [i32; 3] },
    /// Arbitrary per-site values, indexed like [`LatticeGeometry::site_index`].
    Tabulated { values: Vec<f64> },
}

impl PotentialSpec {
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Sinusoidal { amplitude, .. } => *amplitude == 0.0,
            PotentialSpec::Tabulated { values } => values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn eval(&self, geom: &LatticeGeometry, site: usize) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Sinusoidal { amplitude, wavevector } => {
                let x = geom.position(site);
                let mut phase = 0.0;
                for k in 0..geom.dim() {
                    phase += wavevector[k] as f64 * x[k];
                }
                amplitude * (2.0 * std::f64::consts::PI * phase).sin()
            }
            PotentialSpec::Tabulated { values } => values[site],
        }
    }

    /// Sample the potential on every site of the lattice.
    pub fn field(&self, geom: &LatticeGeometry) -> Result<Vec<f64>, LatticeError> {
        if let PotentialSpec::Tabulated { values } = self {
            if values.len() != geom.n_sites() {
                return Err(LatticeError::BadTableLength {
                    got: values.len(),
                    want: geom.n_sites(),
                });
            }
        }
        Ok((0..geom.n_sites()).map(|s| self.eval(geom, s)).collect())
    }
}

/// Hop parameters of one species: bare diffusivity and drift potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    pub name: Species,
    pub d_coef: f64,
    pub potential: PotentialSpec,
}

impl SpeciesParams {
    pub fn new(name: Species, d_coef: f64, potential: PotentialSpec) -> Self {
        assert!(d_coef > 0.0, "diffusivity must be positive");
        SpeciesParams { name, d_coef, potential }
    }
}

pub const EMPTY: u32 = u32::MAX;

/// One particle: current site, species, tracer flag, and the unwrapped
/// displacement in lattice steps accumulated since initialisation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Particle {
    pub site: u32,
    pub species: Species,
    pub tagged: bool,
    pub disp: [i32; 3],
}

/// Full microscopic configuration: occupancy grid plus particle list.
///
/// `site_occupant[s]` is the index into `particles` of the particle on site
/// `s`, or [`EMPTY`]. The two views are kept mutually consistent by all public
/// mutators; [`validate_state`] cross-checks the bijection.
#[derive(Clone, Debug)]
pub struct LatticeState {
    pub geom: LatticeGeometry,
    pub site_occupant: Vec<u32>,
    pub particles: Vec<Particle>,
    pub time: f64,
}

impl LatticeState {
    pub fn empty(geom: LatticeGeometry) -> Self {
        LatticeState {
            geom,
            site_occupant: vec![EMPTY; geom.n_sites()],
            particles: Vec::new(),
            time: 0.0,
        }
    }

    pub fn n_particles(&self) -> usize {
        self.particles.len()
    }

    pub fn count(&self, species: Species) -> usize {
        self.particles.iter().filter(|p| p.species == species).count()
    }

    pub fn is_occupied(&self, site: usize) -> bool {
        self.site_occupant[site] != EMPTY
    }

    /// Add a particle on a free site. Panics if the site is taken.
    pub fn place(&mut self, site: usize, species: Species, tagged: bool) {
        assert_eq!(self.site_occupant[site], EMPTY, "site {site} already occupied");
        let id = self.particles.len() as u32;
        self.site_occupant[site] = id;
        self.particles.push(Particle { site: site as u32, species, tagged, disp: [0; 3] });
    }

    /// Move particle `id` to `target` (must be free), recording the signed
    /// lattice step along `axis`.
    pub fn execute_hop(&mut self, id: u32, target: usize, axis: usize, dir: i32) {
        let p = &mut self.particles[id as usize];
        let from = p.site as usize;
        debug_assert_eq!(self.site_occupant[from], id);
        debug_assert_eq!(self.site_occupant[target], EMPTY);
        self.site_occupant[from] = EMPTY;
        self.site_occupant[target] = id;
        p.site = target as u32;
        p.disp[axis] += dir;
    }

    /// Mark every particle as a tracked tracer.
    pub fn tag_all(&mut self) {
        for p in &mut self.particles {
            p.tagged = true;
        }
    }

    /// Per-site empirical occupancy of one species (0 or 1 per site).
    pub fn occupancy(&self, species: Species) -> Vec<f64> {
        let mut occ = vec![0.0; self.geom.n_sites()];
        for p in &self.particles {
            if p.species == species {
                occ[p.site as usize] = 1.0;
            }
        }
        occ
    }
}

/// Cross-check the occupancy grid against the particle list.
pub fn validate_state(state: &LatticeState) -> Result<(), LatticeError> {
    let n = state.geom.n_sites();
    if state.site_occupant.len() != n {
        return Err(LatticeError::InconsistentState(format!(
            "occupancy grid has {} entries, lattice has {n} sites",
            state.site_occupant.len()
        )));
    }
    if !state.time.is_finite() || state.time < 0.0 {
        return Err(LatticeError::InconsistentState(format!(
            "time must be finite and nonnegative, got {}",
            state.time
        )));
    }
    let mut seen = 0usize;
    for (site, &occ) in state.site_occupant.iter().enumerate() {
        if occ == EMPTY {
            continue;
        }
        seen += 1;
        let p = state
            .particles
            .get(occ as usize)
            .ok_or_else(|| LatticeError::InconsistentState(format!(
                "site {site} references particle {occ} beyond list of {}",
                state.particles.len()
            )))?;
        if p.site as usize != site {
            return Err(LatticeError::InconsistentState(format!(
                "site {site} holds particle {occ} whose recorded site is {}",
                p.site
            )));
        }
    }
    if seen != state.particles.len() {
        return Err(LatticeError::InconsistentState(format!(
            "{} occupied sites vs {} particles",
            seen,
            state.particles.len()
        )));
    }
    for (id, p) in state.particles.iter().enumerate() {
        if p.site as usize >= n {
            return Err(LatticeError::InconsistentState(format!(
                "particle {id} sits on site {} beyond lattice of {n}",
                p.site
            )));
        }
        if state.site_occupant[p.site as usize] != id as u32 {
            return Err(LatticeError::InconsistentState(format!(
                "particle {id} not registered on its site {}",
                p.site
            )));
        }
    }
    Ok(())
}

/// How to draw the initial configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitMode {
    /// Exactly `n_red` + `n_blue` particles on uniformly random distinct sites.
    FixedCountUniform { n_red: usize, n_blue: usize },
    /// Independent per-site occupation with probabilities `p_red`, `p_blue`.
    BernoulliUniform { p_red: f64, p_blue: f64 },
    /// Red at density `phi` on the half-torus `x_axis <= split`, blue at
    /// density `phi` on the complement; exact counts, uniform within blocks.
    AxisBlocks { phi: f64, axis: usize, split: f64 },
}

/// Draw an initial configuration. Deterministic given the RNG stream.
pub fn init_state<R: Rng>(
    geom: LatticeGeometry,
    mode: &InitMode,
    rng: &mut R,
) -> Result<LatticeState, LatticeError> {
    let mut state = LatticeState::empty(geom);
    match mode {
        InitMode::FixedCountUniform { n_red, n_blue } => {
            let total = n_red + n_blue;
            if total > geom.n_sites() {
                return Err(LatticeError::OverfullLattice { requested: total, sites: geom.n_sites() });
            }
            let sites = sample_distinct(geom.n_sites(), total, rng);
            for (i, &s) in sites.iter().enumerate() {
                let species = if i < *n_red { Species::Red } else { Species::Blue };
                state.place(s, species, false);
            }
        }
        InitMode::BernoulliUniform { p_red, p_blue } => {
            if !(0.0..=1.0).contains(p_red) || !(0.0..=1.0).contains(p_blue) {
                return Err(LatticeError::BadSplit(format!(
                    "probabilities must lie in [0,1], got p_red={p_red}, p_blue={p_blue}"
                )));
            }
            if p_red + p_blue > 1.0 {
                return Err(LatticeError::BadOccupationProbability { p_r: *p_red, p_b: *p_blue });
            }
            for s in 0..geom.n_sites() {
                let u: f64 = rng.random();
                if u < *p_red {
                    state.place(s, Species::Red, false);
                } else if u < p_red + p_blue {
                    state.place(s, Species::Blue, false);
                }
            }
        }
        InitMode::AxisBlocks { phi, axis, split } => {
            if !(0.0..=1.0).contains(phi) {
                return Err(LatticeError::BadSplit(format!("phi={phi} outside [0,1]")));
            }
            if *axis >= geom.dim() {
                return Err(LatticeError::BadSplit(format!(
                    "axis {axis} outside 0..{}",
                    geom.dim()
                )));
            }
            if !(0.0 < *split && *split < 1.0) {
                return Err(LatticeError::BadSplit(format!("split={split} outside (0,1)")));
            }
            let mut red_block = Vec::new();
            let mut blue_block = Vec::new();
            for s in 0..geom.n_sites() {
                if geom.position(s)[*axis] <= *split {
                    red_block.push(s);
                } else {
                    blue_block.push(s);
                }
            }
            if red_block.is_empty() || blue_block.is_empty() {
                return Err(LatticeError::BadSplit(format!(
                    "split={split} leaves an empty block"
                )));
            }
            for (block, species) in [(red_block, Species::Red), (blue_block, Species::Blue)] {
                let n = (phi * block.len() as f64).round() as usize;
                let picks = sample_distinct(block.len(), n, rng);
                for &i in &picks {
                    state.place(block[i], species, false);
                }
            }
        }
    }
    Ok(state)
}

/// `n` distinct values from `0..pool` by partial Fisher-Yates shuffle.
fn sample_distinct<R: Rng>(pool: usize, n: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(n <= pool);
    let mut all: Vec<usize> = (0..pool).collect();
    for i in 0..n {
        let j = rng.random_range(i..pool);
        all.swap(i, j);
    }
    all.truncate(n);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wrap_is_periodic() {
        let g = LatticeGeometry::new(2, 10).unwrap();
        assert_eq!(g.site_index([10, 0, 0]), g.site_index([0, 0, 0]));
        assert_eq!(g.site_index([-1, 0, 0]), g.site_index([9, 0, 0]));
        assert_eq!(g.site_index([3, -10, 0]), g.site_index([3, 0, 0]));
    }

    #[test]
    fn index_coords_roundtrip() {
        for (d, l) in [(2, 5), (3, 4)] {
            let g = LatticeGeometry::new(d, l).unwrap();
            for s in 0..g.n_sites() {
                assert_eq!(g.site_index(g.site_coords(s)), s);
            }
        }
    }

    #[test]
    fn neighbors_are_adjacent_and_involutive() {
        let g = LatticeGeometry::new(3, 4).unwrap();
        for s in 0..g.n_sites() {
            for k in 0..3 {
                let f = g.neighbor(s, k, 1);
                assert!(g.adjacent(s, f));
                assert_eq!(g.neighbor(f, k, -1), s);
            }
        }
        // distance-2 and diagonal sites are not adjacent
        let s = g.site_index([1, 1, 1]);
        assert!(!g.adjacent(s, g.site_index([3, 1, 1])));
        assert!(!g.adjacent(s, g.site_index([2, 2, 1])));
        assert!(!g.adjacent(s, s));
    }

    #[test]
    fn neighbor_table_matches_geometry() {
        let g = LatticeGeometry::new(2, 6).unwrap();
        let t = NeighborTable::build(&g);
        for s in 0..g.n_sites() {
            for k in 0..2 {
                assert_eq!(t.forward(s, k), g.neighbor(s, k, 1));
                assert_eq!(t.backward(s, k), g.neighbor(s, k, -1));
                assert_eq!(t.step(s, 2 * k), g.neighbor(s, k, 1));
                assert_eq!(t.step(s, 2 * k + 1), g.neighbor(s, k, -1));
            }
        }
    }

    #[test]
    fn cell_centres_avoid_torus_seams() {
        let g = LatticeGeometry::new(2, 50).unwrap();
        for s in 0..g.n_sites() {
            let x = g.position(s);
            for xk in x.iter().take(2) {
                assert!(*xk > 0.0 && *xk < 1.0);
                // never exactly on the half-split used by block initial data
                assert!((xk - 0.5).abs() > 1e-12);
            }
        }
    }

    #[test]
    fn sinusoidal_potential_is_periodic_sample() {
        let g = LatticeGeometry::new(2, 8).unwrap();
        let v = PotentialSpec::Sinusoidal { amplitude: 2.0, wavevector: [1, 0, 0] };
        let f = v.field(&g).unwrap();
        let s0 = g.site_index([0, 0, 0]);
        let s1 = g.site_index([0, 5, 0]);
        // independent of the transverse axis
        assert_eq!(f[s0], f[s1]);
        let x = g.position(s0)[0];
        assert_eq!(f[s0], 2.0 * (2.0 * std::f64::consts::PI * x).sin());
    }

    #[test]
    fn tabulated_potential_length_guard() {
        let g = LatticeGeometry::new(2, 4).unwrap();
        let v = PotentialSpec::Tabulated { values: vec![0.0; 7] };
        assert!(matches!(v.field(&g), Err(LatticeError::BadTableLength { got: 7, want: 16 })));
    }

    #[test]
    fn fixed_count_init_places_exact_counts() {
        let g = LatticeGeometry::new(2, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = init_state(g, &InitMode::FixedCountUniform { n_red: 30, n_blue: 20 }, &mut rng)
            .unwrap();
        assert_eq!(st.count(Species::Red), 30);
        assert_eq!(st.count(Species::Blue), 20);
        validate_state(&st).unwrap();
    }

    #[test]
    fn overfull_lattice_rejected() {
        let g = LatticeGeometry::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = init_state(g, &InitMode::FixedCountUniform { n_red: 10, n_blue: 7 }, &mut rng);
        assert!(matches!(r, Err(LatticeError::OverfullLattice { requested: 17, sites: 16 })));
    }

    #[test]
    fn bernoulli_init_respects_probability_guard() {
        let g = LatticeGeometry::new(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = init_state(g, &InitMode::BernoulliUniform { p_red: 0.7, p_blue: 0.5 }, &mut rng);
        assert!(matches!(r, Err(LatticeError::BadOccupationProbability { .. })));
        let st = init_state(g, &InitMode::BernoulliUniform { p_red: 0.3, p_blue: 0.3 }, &mut rng)
            .unwrap();
        validate_state(&st).unwrap();
    }

    #[test]
    fn axis_blocks_split_is_exact() {
        let g = LatticeGeometry::new(2, 50).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let st = init_state(g, &InitMode::AxisBlocks { phi: 0.5, axis: 0, split: 0.5 }, &mut rng)
            .unwrap();
        // 25 columns of 50 sites per block at density 1/2
        assert_eq!(st.count(Species::Red), 625);
        assert_eq!(st.count(Species::Blue), 625);
        for p in &st.particles {
            let x = g.position(p.site as usize)[0];
            match p.species {
                Species::Red => assert!(x <= 0.5),
                Species::Blue => assert!(x > 0.5),
            }
        }
        validate_state(&st).unwrap();
    }

    #[test]
    fn validate_state_catches_corruption() {
        let g = LatticeGeometry::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st =
            init_state(g, &InitMode::FixedCountUniform { n_red: 3, n_blue: 3 }, &mut rng).unwrap();
        let site = st.particles[0].site as usize;
        st.site_occupant[site] = EMPTY;
        assert!(validate_state(&st).is_err());
    }

    #[test]
    fn empty_state_time_guard() {
        let g = LatticeGeometry::new(2, 4).unwrap();
        let mut st = LatticeState::empty(g);
        validate_state(&st).unwrap();
        st.time = f64::NAN;
        assert!(validate_state(&st).is_err());
    }
}
