//! Statistical estimators applied to simulation snapshots: tracer diffusion
//! from mean-squared displacements, binned density profiles, and an
//! empirical free-energy trace with jackknife bias control.

use crate::continuum::{free_energy, ContinuumParams, DensityFields};
use crate::lattice::{LatticeState, Species};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum EstimatorError {
    #[error("displacement window is empty: t0 = {t0}, t1 = {t1}")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("no tagged tracer particles in the snapshot")]
    NoTracers,
    #[error("no realizations supplied")]
    NoRealizations,
    #[error("snapshots disagree: {0}")]
    MismatchedSnapshots(String),
    #[error("bin width {width} invalid for grid spacing {spacing}: need spacing <= width <= 1")]
    BadBinWidth { width: f64, spacing: f64 },
    #[error(transparent)]
    Continuum(#[from] crate::continuum::ContinuumError),
}

/// Mean and standard error over independent samples. A single sample reports
/// zero standard error.
pub fn mean_stderr(samples: &[f64]) -> Result<(f64, f64), EstimatorError> {
    if samples.is_empty() {
        return Err(EstimatorError::NoRealizations);
    }
    let k = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / k;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}

/// Tracer diffusion coefficient of one realization from the displacement
/// accumulated between two snapshots of the same trajectory:
/// `mean over tracers of |dx|^2 h^2 / (2 d (t1 - t0))`.
pub fn self_diffusion_from_window(
    start: &LatticeState,
    end: &LatticeState,
) -> Result<f64, EstimatorError> {
    if end.time <= start.time {
        return Err(EstimatorError::EmptyWindow { t0: start.time, t1: end.time });
    }
    if start.particles.len() != end.particles.len() || start.geom != end.geom {
        return Err(EstimatorError::MismatchedSnapshots(
            "window endpoints come from different systems".into(),
        ));
    }
    let h = start.geom.spacing();
    let two_d = 2.0 * start.geom.dim() as f64;
    let dt = end.time - start.time;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p0, p1) in start.particles.iter().zip(&end.particles) {
        if !p0.tagged {
            continue;
        }
        debug_assert_eq!(p0.species, p1.species);
        let mut sq = 0.0;
        for ax in 0..start.geom.dim() {
            let d = (p1.disp[ax] - p0.disp[ax]) as f64 * h;
            sq += d * d;
        }
        sum += sq;
        n += 1;
    }
    if n == 0 {
        return Err(EstimatorError::NoTracers);
    }
    Ok(sum / n as f64 / (two_d * dt))
}

/// Density profile along one axis, binned with the given width and averaged
/// over realizations.
#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub axis: usize,
    /// `n_bins + 1` edges; the last bin may be narrower than the rest.
    pub edges: Vec<f64>,
    pub centers: Vec<f64>,
    /// Grid sites falling in each bin.
    pub sites_per_bin: Vec<usize>,
    /// Per species: mean occupied fraction per bin over realizations.
    pub mean: [Vec<f64>; 2],
    /// Per species: standard error of that mean.
    pub stderr: [Vec<f64>; 2],
    pub n_realizations: usize,
}

/// Bin the per-site occupancy of every realization along `axis` into bins of
/// width `width` (the final bin absorbs the remainder of the unit interval).
pub fn density_profile(
    snapshots: &[&LatticeState],
    axis: usize,
    width: f64,
) -> Result<DensityProfile, EstimatorError> {
    let first = *snapshots.first().ok_or(EstimatorError::NoRealizations)?;
    let geom = first.geom;
    if axis >= geom.dim() {
        return Err(EstimatorError::MismatchedSnapshots(format!(
            "axis {axis} outside 0..{}",
            geom.dim()
        )));
    }
    let h = geom.spacing();
    if !(width >= h - 1e-12 && width <= 1.0) {
        return Err(EstimatorError::BadBinWidth { width, spacing: h });
    }
    for s in snapshots {
        if s.geom != geom {
            return Err(EstimatorError::MismatchedSnapshots("geometry differs".into()));
        }
        if (s.time - first.time).abs() > 1e-9 {
            return Err(EstimatorError::MismatchedSnapshots(format!(
                "times differ: {} vs {}",
                s.time, first.time
            )));
        }
    }

    let mut n_bins = ((1.0 / width) - 1e-9).ceil().max(1.0) as usize;
    let count_bins = |n_bins: usize| -> Vec<usize> {
        let mut c = vec![0usize; n_bins];
        for s in 0..geom.n_sites() {
            let x = geom.position(s)[axis];
            c[((x / width).floor() as usize).min(n_bins - 1)] += 1;
        }
        c
    };
    let mut sites_per_bin = count_bins(n_bins);
    // A trailing partial bin narrower than the grid spacing may catch no cell
    // centres; fold it into its neighbour so every bin is populated.
    if *sites_per_bin.last().unwrap() == 0 && n_bins > 1 {
        n_bins -= 1;
        sites_per_bin = count_bins(n_bins);
    }
    let bin_of = |x: f64| -> usize { ((x / width).floor() as usize).min(n_bins - 1) };
    let mut edges: Vec<f64> = (0..n_bins).map(|j| j as f64 * width).collect();
    edges.push(1.0);
    let centers: Vec<f64> =
        edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect();
    debug_assert!(sites_per_bin.iter().all(|&c| c > 0));

    let k = snapshots.len();
    // per-realization occupied fraction per bin, then mean/stderr across
    let mut per_real: [Vec<Vec<f64>>; 2] = [Vec::with_capacity(k), Vec::with_capacity(k)];
    for snap in snapshots {
        let mut counts = [vec![0usize; n_bins], vec![0usize; n_bins]];
        for p in &snap.particles {
            let x = geom.position(p.site as usize)[axis];
            counts[p.species.index()][bin_of(x)] += 1;
        }
        for sp in 0..2 {
            per_real[sp].push(
                counts[sp]
                    .iter()
                    .zip(&sites_per_bin)
                    .map(|(&c, &n)| c as f64 / n as f64)
                    .collect(),
            );
        }
    }
    let mut mean = [vec![0.0; n_bins], vec![0.0; n_bins]];
    let mut stderr = [vec![0.0; n_bins], vec![0.0; n_bins]];
    for sp in 0..2 {
        for j in 0..n_bins {
            let column: Vec<f64> = per_real[sp].iter().map(|r| r[j]).collect();
            let (m, se) = mean_stderr(&column)?;
            mean[sp][j] = m;
            stderr[sp][j] = se;
        }
    }
    Ok(DensityProfile {
        axis,
        edges,
        centers,
        sites_per_bin,
        mean,
        stderr,
        n_realizations: k,
    })
}

impl DensityProfile {
    /// Sum of `mean * sites` over bins: recovers the average particle count
    /// of a species exactly (a counting identity of the binning).
    pub fn total_particles(&self, species: Species) -> f64 {
        self.mean[species.index()]
            .iter()
            .zip(&self.sites_per_bin)
            .map(|(&m, &n)| m * n as f64)
            .sum()
    }
}

/// Free energy estimated from an ensemble of microscopic snapshots taken at
/// the same instant.
#[derive(Clone, Copy, Debug)]
pub struct EnergyEstimate {
    pub time: f64,
    /// Plug-in value: energy functional of the ensemble-averaged occupancy.
    pub plugin: f64,
    /// Jackknife bias-corrected value (use this one).
    pub value: f64,
    /// Estimated plug-in bias `(K-1)(mean of leave-one-out values - plugin)`;
    /// `value = plugin - bias`.
    pub bias: f64,
    pub stderr: f64,
    pub n_realizations: usize,
}

/// Evaluate the mixing free energy on the ensemble-averaged occupancy with a
/// leave-one-out jackknife over realizations for bias and error control.
pub fn empirical_energy(
    snapshots: &[&LatticeState],
    params: &ContinuumParams,
) -> Result<EnergyEstimate, EstimatorError> {
    let first = *snapshots.first().ok_or(EstimatorError::NoRealizations)?;
    let geom = first.geom;
    let k = snapshots.len();
    for s in snapshots {
        if s.geom != geom {
            return Err(EstimatorError::MismatchedSnapshots("geometry differs".into()));
        }
        if (s.time - first.time).abs() > 1e-9 {
            return Err(EstimatorError::MismatchedSnapshots("times differ".into()));
        }
    }
    let n = geom.n_sites();
    let mut occ: Vec<[Vec<f64>; 2]> = Vec::with_capacity(k);
    let mut total = [vec![0.0; n], vec![0.0; n]];
    for snap in snapshots {
        let r = snap.occupancy(Species::Red);
        let b = snap.occupancy(Species::Blue);
        for s in 0..n {
            total[0][s] += r[s];
            total[1][s] += b[s];
        }
        occ.push([r, b]);
    }
    let energy_of = |red: Vec<f64>, blue: Vec<f64>| -> Result<f64, EstimatorError> {
        let f = DensityFields { geom, red, blue, time: first.time };
        Ok(free_energy(&f, params)?)
    };
    let kf = k as f64;
    let plugin = energy_of(
        total[0].iter().map(|t| t / kf).collect(),
        total[1].iter().map(|t| t / kf).collect(),
    )?;
    if k == 1 {
        return Ok(EnergyEstimate {
            time: first.time,
            plugin,
            value: plugin,
            bias: 0.0,
            stderr: 0.0,
            n_realizations: 1,
        });
    }
    let mut loo = Vec::with_capacity(k);
    for o in &occ {
        let red: Vec<f64> = total[0].iter().zip(&o[0]).map(|(t, x)| (t - x) / (kf - 1.0)).collect();
        let blue: Vec<f64> =
            total[1].iter().zip(&o[1]).map(|(t, x)| (t - x) / (kf - 1.0)).collect();
        loo.push(energy_of(red, blue)?);
    }
    let loo_mean = loo.iter().sum::<f64>() / kf;
    let bias = (kf - 1.0) * (loo_mean - plugin);
    let var = loo.iter().map(|e| (e - loo_mean) * (e - loo_mean)).sum::<f64>() * (kf - 1.0) / kf;
    Ok(EnergyEstimate {
        time: first.time,
        plugin,
        value: plugin - bias,
        bias,
        stderr: var.sqrt(),
        n_realizations: k,
    })
}

/// Like [`empirical_energy`], but each realization's occupancy is first
/// averaged over the lattice directions transverse to `axis`.
///
/// When the ensemble law is invariant along those directions (as it is for
/// block or uniform initial data with potentials depending on one coordinate)
/// this changes nothing in expectation while dividing the per-cell sampling
/// variance by the transverse volume, which shrinks the nonlinearity bias of
/// the plug-in value by the same factor.
pub fn empirical_energy_profile(
    snapshots: &[&LatticeState],
    params: &ContinuumParams,
    axis: usize,
) -> Result<EnergyEstimate, EstimatorError> {
    let first = *snapshots.first().ok_or(EstimatorError::NoRealizations)?;
    let geom = first.geom;
    if axis >= geom.dim() {
        return Err(EstimatorError::MismatchedSnapshots(format!(
            "axis {axis} outside 0..{}",
            geom.dim()
        )));
    }
    let k = snapshots.len();
    for s in snapshots {
        if s.geom != geom {
            return Err(EstimatorError::MismatchedSnapshots("geometry differs".into()));
        }
        if (s.time - first.time).abs() > 1e-9 {
            return Err(EstimatorError::MismatchedSnapshots("times differ".into()));
        }
    }
    let n = geom.n_sites();
    let side = geom.side();
    let layer_of: Vec<usize> = (0..n).map(|s| geom.site_coords(s)[axis] as usize).collect();
    let per_layer = (n / side) as f64;
    let mut prof: Vec<[Vec<f64>; 2]> = Vec::with_capacity(k);
    let mut total = [vec![0.0; side], vec![0.0; side]];
    for snap in snapshots {
        let mut p = [vec![0.0; side], vec![0.0; side]];
        for part in &snap.particles {
            p[part.species.index()][layer_of[part.site as usize]] += 1.0;
        }
        for sp in 0..2 {
            for l in 0..side {
                p[sp][l] /= per_layer;
                total[sp][l] += p[sp][l];
            }
        }
        prof.push(p);
    }
    // Evaluate the full functional on the layer profile replicated across the
    // transverse directions, so potentials enter exactly as in the plain
    // estimator.
    let energy_of = |r_layer: &[f64], b_layer: &[f64]| -> Result<f64, EstimatorError> {
        let f = DensityFields {
            geom,
            red: layer_of.iter().map(|&l| r_layer[l]).collect(),
            blue: layer_of.iter().map(|&l| b_layer[l]).collect(),
            time: first.time,
        };
        Ok(free_energy(&f, params)?)
    };
    let kf = k as f64;
    let mean_r: Vec<f64> = total[0].iter().map(|t| t / kf).collect();
    let mean_b: Vec<f64> = total[1].iter().map(|t| t / kf).collect();
    let plugin = energy_of(&mean_r, &mean_b)?;
    if k == 1 {
        return Ok(EnergyEstimate {
            time: first.time,
            plugin,
            value: plugin,
            bias: 0.0,
            stderr: 0.0,
            n_realizations: 1,
        });
    }
    let mut loo = Vec::with_capacity(k);
    for p in &prof {
        let r: Vec<f64> = total[0].iter().zip(&p[0]).map(|(t, x)| (t - x) / (kf - 1.0)).collect();
        let b: Vec<f64> = total[1].iter().zip(&p[1]).map(|(t, x)| (t - x) / (kf - 1.0)).collect();
        loo.push(energy_of(&r, &b)?);
    }
    let loo_mean = loo.iter().sum::<f64>() / kf;
    let bias = (kf - 1.0) * (loo_mean - plugin);
    let var = loo.iter().map(|e| (e - loo_mean) * (e - loo_mean)).sum::<f64>() * (kf - 1.0) / kf;
    Ok(EnergyEstimate {
        time: first.time,
        plugin,
        value: plugin - bias,
        bias,
        stderr: var.sqrt(),
        n_realizations: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::MobilityModel;
    use crate::lattice::{LatticeGeometry, PotentialSpec, SpeciesParams};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn flat_params() -> ContinuumParams {
        ContinuumParams {
            species: [
                SpeciesParams::new(Species::Red, 1.0, PotentialSpec::Zero),
                SpeciesParams::new(Species::Blue, 1.0, PotentialSpec::Zero),
            ],
            alpha: PI / 2.0 - 1.0,
            model: MobilityModel::MeanField,
        }
    }

    #[test]
    fn mean_stderr_basics() {
        let (m, se) = mean_stderr(&[2.0, 4.0, 6.0]).unwrap();
        assert_abs_diff_eq!(m, 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(se, (4.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        let (m1, se1) = mean_stderr(&[7.0]).unwrap();
        assert_eq!((m1, se1), (7.0, 0.0));
        assert!(matches!(mean_stderr(&[]), Err(EstimatorError::NoRealizations)));
    }

    #[test]
    fn displacement_window_reproduces_hand_value() {
        let geom = LatticeGeometry::new(2, 10).unwrap();
        let mut start = LatticeState::empty(geom);
        start.place(0, Species::Red, true);
        start.place(5, Species::Red, true);
        start.place(9, Species::Blue, false); // untagged: excluded
        let mut end = start.clone();
        end.time = 0.5;
        end.particles[0].disp = [3, -4, 0]; // squared step count 25
        end.particles[1].disp = [0, 2, 0]; // squared step count 4
        end.particles[2].disp = [100, 0, 0]; // ignored
        let h = geom.spacing();
        let want = (25.0 + 4.0) / 2.0 * h * h / (4.0 * 0.5);
        assert_abs_diff_eq!(
            self_diffusion_from_window(&start, &end).unwrap(),
            want,
            epsilon = 1e-15
        );
    }

    #[test]
    fn displacement_window_guards() {
        let geom = LatticeGeometry::new(2, 10).unwrap();
        let mut a = LatticeState::empty(geom);
        a.place(0, Species::Red, true);
        let b = a.clone();
        assert!(matches!(
            self_diffusion_from_window(&a, &b),
            Err(EstimatorError::EmptyWindow { .. })
        ));
        let mut untagged = LatticeState::empty(geom);
        untagged.place(0, Species::Red, false);
        let mut later = untagged.clone();
        later.time = 1.0;
        assert!(matches!(
            self_diffusion_from_window(&untagged, &later),
            Err(EstimatorError::NoTracers)
        ));
    }

    #[test]
    fn profile_bins_and_counting_identity() {
        let geom = LatticeGeometry::new(2, 4).unwrap(); // h = 0.25, x in {.125,.375,.625,.875}
        let mut s = LatticeState::empty(geom);
        // two red in the first column (x1 = 0.125), one blue at x1 = 0.875
        s.place(geom.site_index([0, 0, 0]), Species::Red, false);
        s.place(geom.site_index([0, 2, 0]), Species::Red, false);
        s.place(geom.site_index([3, 1, 0]), Species::Blue, false);
        let profile = density_profile(&[&s], 0, 0.3).unwrap();
        // the empty trailing sliver [0.9, 1) is folded into the third bin
        assert_eq!(profile.sites_per_bin, vec![4, 4, 8]);
        assert_eq!(profile.edges, vec![0.0, 0.3, 0.6, 1.0]);
        assert_abs_diff_eq!(profile.mean[0][0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(profile.mean[0][1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(profile.mean[1][2], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(profile.total_particles(Species::Red), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(profile.total_particles(Species::Blue), 1.0, epsilon = 1e-12);
        // identical realizations have zero spread
        let twice = density_profile(&[&s, &s], 0, 0.3).unwrap();
        assert!(twice.stderr[0].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn profile_partial_last_bin_site_counts() {
        let geom = LatticeGeometry::new(2, 50).unwrap(); // h = 0.02
        let s = LatticeState::empty(geom);
        let profile = density_profile(&[&s], 0, 0.08).unwrap();
        assert_eq!(profile.sites_per_bin.len(), 13); // 12 full + 1 partial
        assert_eq!(profile.sites_per_bin[0], 4 * 50);
        assert_eq!(*profile.sites_per_bin.last().unwrap(), 2 * 50);
        assert_abs_diff_eq!(*profile.edges.last().unwrap(), 1.0, epsilon = 0.0);
    }

    #[test]
    fn profile_guards() {
        let geom = LatticeGeometry::new(2, 10).unwrap();
        let s = LatticeState::empty(geom);
        assert!(matches!(
            density_profile(&[&s], 0, 0.05),
            Err(EstimatorError::BadBinWidth { .. })
        ));
        assert!(matches!(
            density_profile(&[&s], 0, 1.5),
            Err(EstimatorError::BadBinWidth { .. })
        ));
        assert!(matches!(density_profile(&[], 0, 0.2), Err(EstimatorError::NoRealizations)));
        assert!(density_profile(&[&s], 2, 0.2).is_err());
        let mut late = s.clone();
        late.time = 1.0;
        assert!(matches!(
            density_profile(&[&s, &late], 0, 0.2),
            Err(EstimatorError::MismatchedSnapshots(_))
        ));
    }

    #[test]
    fn energy_of_identical_hard_snapshots_is_potential_only() {
        // 0/1 occupancies kill every entropy term, so the plug-in energy is
        // the potential sum; identical realizations leave nothing for the
        // jackknife to correct
        let geom = LatticeGeometry::new(2, 8).unwrap();
        let mut params = flat_params();
        params.species[0].potential =
            PotentialSpec::Sinusoidal { amplitude: 1.0, wavevector: [1, 0, 0] };
        let mut s = LatticeState::empty(geom);
        s.place(geom.site_index([1, 0, 0]), Species::Red, false);
        s.place(geom.site_index([6, 3, 0]), Species::Red, false);
        let v1 = (2.0 * PI * geom.position(geom.site_index([1, 0, 0]))[0]).sin();
        let v6 = (2.0 * PI * geom.position(geom.site_index([6, 3, 0]))[0]).sin();
        let h = geom.spacing();
        let want = (v1 + v6) * h * h;
        let est = empirical_energy(&[&s, &s, &s], &params).unwrap();
        assert_abs_diff_eq!(est.plugin, want, epsilon = 1e-13);
        assert_abs_diff_eq!(est.value, want, epsilon = 1e-13);
        assert_eq!(est.bias, 0.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn jackknife_reduces_occupancy_noise_bias() {
        // independent Bernoulli(0.3) fields: the plug-in energy of the
        // K-sample mean is biased upward in entropy terms by O(1/K); the
        // jackknife correction should land much closer to the exact value
        let geom = LatticeGeometry::new(2, 24).unwrap();
        let params = flat_params();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let k = 30;
        let states: Vec<LatticeState> = (0..k)
            .map(|_| {
                let mut s = LatticeState::empty(geom);
                for site in 0..geom.n_sites() {
                    let u: f64 = rng.random();
                    if u < 0.3 {
                        s.place(site, Species::Red, false);
                    } else if u < 0.6 {
                        s.place(site, Species::Blue, false);
                    }
                }
                s
            })
            .collect();
        let refs: Vec<&LatticeState> = states.iter().collect();
        let est = empirical_energy(&refs, &params).unwrap();
        let exact = free_energy(&DensityFields::uniform(geom, 0.3, 0.3), &params).unwrap();
        let plugin_err = (est.plugin - exact).abs();
        let corrected_err = (est.value - exact).abs();
        assert!(
            corrected_err < 0.5 * plugin_err,
            "jackknife should beat plug-in: {corrected_err} vs {plugin_err}"
        );
        assert!(est.bias.abs() > 1e-4, "bias should be visible at K = 30");
    }

    #[test]
    fn profile_energy_matches_plain_on_transverse_invariant_states() {
        // occupancy constant along axis 1: averaging over it changes nothing,
        // so the two estimators must agree exactly
        let geom = LatticeGeometry::new(2, 8).unwrap();
        let params = flat_params();
        let mk = |cols: &[(i64, Species)]| {
            let mut s = LatticeState::empty(geom);
            for &(c, sp) in cols {
                for row in 0..8 {
                    s.place(geom.site_index([c, row, 0]), sp, false);
                }
            }
            s
        };
        let a = mk(&[(0, Species::Red), (3, Species::Blue)]);
        let b = mk(&[(1, Species::Red), (3, Species::Blue), (6, Species::Red)]);
        let plain = empirical_energy(&[&a, &b], &params).unwrap();
        let prof = empirical_energy_profile(&[&a, &b], &params, 0).unwrap();
        assert_abs_diff_eq!(prof.plugin, plain.plugin, epsilon = 1e-13);
        assert_abs_diff_eq!(prof.value, plain.value, epsilon = 1e-13);
        assert_abs_diff_eq!(prof.stderr, plain.stderr, epsilon = 1e-13);
    }

    #[test]
    fn profile_energy_averages_transverse_noise_before_evaluating() {
        // one red particle at (0,0): the axis-0 layer profile is 1/side in
        // layer 0, and the plug-in value is the functional of that profile
        let geom = LatticeGeometry::new(2, 6).unwrap();
        let params = flat_params();
        let mut s = LatticeState::empty(geom);
        s.place(geom.site_index([0, 0, 0]), Species::Red, false);
        let est = empirical_energy_profile(&[&s], &params, 0).unwrap();
        let rho = 1.0 / 6.0;
        let fields =
            DensityFields::from_fn(geom, |x| if x[0] < 1.0 / 6.0 { rho } else { 0.0 }, |_| 0.0);
        let want = free_energy(&fields, &params).unwrap();
        assert_abs_diff_eq!(est.plugin, want, epsilon = 1e-13);
        let full = empirical_energy(&[&s], &params).unwrap();
        assert!(
            est.plugin < full.plugin,
            "smearing a point mass lowers entropy-dominated energy: {} vs {}",
            est.plugin,
            full.plugin
        );
    }
}
