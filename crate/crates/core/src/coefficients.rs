//! Lattice transport coefficients from Brillouin-zone quadrature.
//!
//! Everything here derives from two ingredients evaluated by a tensor-product
//! midpoint rule over `[-pi, pi]^d`:
//!
//! * the scalar constant
//!   `beta = -(2 pi)^-d INT sin^2(z_1) / (2 sum_k sin^2(z_k/2)) dz`,
//!   with `alpha = -beta / (1 + beta)`;
//! * the odd lattice function
//!   `psi_j(v) = -(2 pi)^-d INT sin(z_j) sin(z . v) / (2 sum_k sin^2(z_k/2)) dz`,
//!   which solves the discrete Poisson problem
//!   `lap psi_j(v) = v_j` for `|v| = 1`, `lap psi_j(v) = 0` otherwise,
//!   vanishing at the origin and at infinity (`lap` is the unit-spacing
//!   lattice Laplacian).
//!
//! Midpoint nodes `z_i = -pi + (i + 1/2) 2 pi / M` (M even) never hit the
//! integrable singularity at `z = 0`, and the half-offset makes the node set
//! symmetric under `z -> -z`, so odd parts cancel exactly. Empirically the
//! rule converges like `O(M^-(d+2))`, so modest resolutions already reach
//! near machine accuracy; resolution is doubled until successive values
//! settle below a tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum CoefficientsError {
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("quadrature resolution must be even and positive, got {0}")]
    BadResolution(u32),
    #[error(
        "quadrature did not settle below {tol:e} by M={resolution} (last change {last_diff:e})"
    )]
    NoConvergence { tol: f64, resolution: u32, last_diff: f64 },
    #[error("{what} = {value} outside {range}")]
    OutOfRange { what: &'static str, value: f64, range: &'static str },
    #[error("offset {0:?} outside tabulated radius {1}")]
    OutsideTable([i64; 3], i64),
}

/// Convergence threshold for the scalar constant: double the resolution until
/// successive values differ by less than this.
pub const BETA_TOL: f64 = 1e-9;
/// Same for tabulated `psi` values (max over all requested offsets).
pub const PSI_TOL: f64 = 1e-8;

const BETA_M0: u32 = 16;
const BETA_M_MAX: u32 = 4096;
const PSI_M0: u32 = 64;
const PSI_M_MAX: u32 = 4096;

/// `beta`, `alpha` and the quadrature resolution that produced them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportCoefficients {
    pub d: usize,
    pub beta: f64,
    pub alpha: f64,
    pub resolution: u32,
}

/// Midpoint nodes and per-axis trigonometric samples shared by the integrands.
struct AxisSamples {
    /// sin^2(z_i / 2)
    s_half: Vec<f64>,
    /// sin(z_i)
    sin_z: Vec<f64>,
    nodes: Vec<f64>,
}

impl AxisSamples {
    fn new(m: u32) -> Self {
        let m = m as usize;
        let step = 2.0 * std::f64::consts::PI / m as f64;
        let mut s_half = Vec::with_capacity(m);
        let mut sin_z = Vec::with_capacity(m);
        let mut nodes = Vec::with_capacity(m);
        for i in 0..m {
            let z = -std::f64::consts::PI + (i as f64 + 0.5) * step;
            let s = (0.5 * z).sin();
            s_half.push(s * s);
            sin_z.push(z.sin());
            nodes.push(z);
        }
        AxisSamples { s_half, sin_z, nodes }
    }
}

fn check_dim(d: usize) -> Result<(), CoefficientsError> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(CoefficientsError::BadDimension(d))
    }
}

fn check_resolution(m: u32) -> Result<(), CoefficientsError> {
    if m == 0 || !m.is_multiple_of(2) {
        Err(CoefficientsError::BadResolution(m))
    } else {
        Ok(())
    }
}

/// Midpoint approximation of `beta` at fixed resolution `m` (nodes per axis).
pub fn beta_quadrature(d: usize, m: u32) -> Result<f64, CoefficientsError> {
    check_dim(d)?;
    check_resolution(m)?;
    let ax = AxisSamples::new(m);
    let n = m as usize;
    let mut total = 0.0;
    match d {
        2 => {
            for i in 0..n {
                let num = ax.sin_z[i] * ax.sin_z[i];
                let si = ax.s_half[i];
                let mut row = 0.0;
                for j in 0..n {
                    row += num / (2.0 * (si + ax.s_half[j]));
                }
                total += row;
            }
        }
        3 => {
            for i in 0..n {
                let num = ax.sin_z[i] * ax.sin_z[i];
                let si = ax.s_half[i];
                let mut plane = 0.0;
                for j in 0..n {
                    let sij = si + ax.s_half[j];
                    let mut row = 0.0;
                    for k in 0..n {
                        row += num / (2.0 * (sij + ax.s_half[k]));
                    }
                    plane += row;
                }
                total += plane;
            }
        }
        _ => unreachable!(),
    }
    Ok(-total / (n as f64).powi(d as i32))
}

fn refine_doubling(
    m0: u32,
    m_max: u32,
    tol: f64,
    mut eval: impl FnMut(u32) -> Result<f64, CoefficientsError>,
) -> Result<(f64, u32), CoefficientsError> {
    let mut m = m0;
    let mut prev = eval(m)?;
    while m < m_max {
        m *= 2;
        let cur = eval(m)?;
        if (cur - prev).abs() < tol {
            return Ok((cur, m));
        }
        prev = cur;
    }
    Err(CoefficientsError::NoConvergence { tol, resolution: m, last_diff: f64::NAN })
}

/// `beta` and `alpha = -beta/(1+beta)` with the default refinement schedule.
pub fn compute_beta_alpha(d: usize) -> Result<TransportCoefficients, CoefficientsError> {
    compute_beta_alpha_with(d, BETA_TOL, BETA_M_MAX)
}

pub fn compute_beta_alpha_with(
    d: usize,
    tol: f64,
    m_max: u32,
) -> Result<TransportCoefficients, CoefficientsError> {
    let (beta, resolution) = refine_doubling(BETA_M0, m_max, tol, |m| beta_quadrature(d, m))?;
    Ok(TransportCoefficients { d, beta, alpha: -beta / (1.0 + beta), resolution })
}

/// `psi_j(v)` for all components `j` at fixed resolution.
pub fn psi_eval(d: usize, v: [i64; 3], m: u32) -> Result<[f64; 3], CoefficientsError> {
    check_dim(d)?;
    check_resolution(m)?;
    let ax = AxisSamples::new(m);
    Ok(psi_eval_with(d, v, &ax))
}

fn psi_eval_with(d: usize, v: [i64; 3], ax: &AxisSamples) -> [f64; 3] {
    let n = ax.nodes.len();
    // per-axis samples of sin(z * v_k), cos(z * v_k)
    let mut sv = [Vec::new(), Vec::new(), Vec::new()];
    let mut cv = [Vec::new(), Vec::new(), Vec::new()];
    for k in 0..d {
        let (s, c): (Vec<f64>, Vec<f64>) =
            ax.nodes.iter().map(|z| (z * v[k] as f64).sin_cos()).unzip();
        sv[k] = s;
        cv[k] = c;
    }
    let mut out = [0.0; 3];
    match d {
        2 => {
            for (j, out_j) in out.iter_mut().enumerate().take(2) {
                let mut total = 0.0;
                for i in 0..n {
                    let si = ax.s_half[i];
                    let mut row = 0.0;
                    for jj in 0..n {
                        // sin(z1 v1 + z2 v2) by angle addition
                        let phase = sv[0][i] * cv[1][jj] + cv[0][i] * sv[1][jj];
                        let sin_zj = if j == 0 { ax.sin_z[i] } else { ax.sin_z[jj] };
                        row += sin_zj * phase / (2.0 * (si + ax.s_half[jj]));
                    }
                    total += row;
                }
                *out_j = -total / (n as f64).powi(2);
            }
        }
        3 => {
            for (j, out_j) in out.iter_mut().enumerate() {
                let mut total = 0.0;
                for i in 0..n {
                    let si = ax.s_half[i];
                    let mut plane = 0.0;
                    for jj in 0..n {
                        let sij = si + ax.s_half[jj];
                        // sin/cos of z1 v1 + z2 v2
                        let s12 = sv[0][i] * cv[1][jj] + cv[0][i] * sv[1][jj];
                        let c12 = cv[0][i] * cv[1][jj] - sv[0][i] * sv[1][jj];
                        let mut row = 0.0;
                        for kk in 0..n {
                            let phase = s12 * cv[2][kk] + c12 * sv[2][kk];
                            let sin_zj = match j {
                                0 => ax.sin_z[i],
                                1 => ax.sin_z[jj],
                                _ => ax.sin_z[kk],
                            };
                            row += sin_zj * phase / (2.0 * (sij + ax.s_half[kk]));
                        }
                        plane += row;
                    }
                    total += plane;
                }
                *out_j = -total / (n as f64).powi(3);
            }
        }
        _ => unreachable!(),
    }
    out
}

/// `psi` tabulated on the cube `|v|_inf <= radius`.
///
/// Only lexicographically positive offsets are integrated; their negatives are
/// filled by the exact antisymmetry `psi_j(-v) = -psi_j(v)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiTable {
    pub d: usize,
    pub radius: i64,
    pub resolution: u32,
    /// `values[offset_index * d + j]`, offsets in row-major order over
    /// `[-radius, radius]^d`, first axis fastest.
    values: Vec<f64>,
}

pub const PSI_TABLE_RADIUS: i64 = 10;

impl PsiTable {
    /// Build with the default radius and refinement-until-settled resolution.
    pub fn build(d: usize) -> Result<Self, CoefficientsError> {
        Self::build_with(d, PSI_TABLE_RADIUS, PSI_TOL)
    }

    pub fn build_with(d: usize, radius: i64, tol: f64) -> Result<Self, CoefficientsError> {
        check_dim(d)?;
        assert!(radius >= 1);
        let mut m = PSI_M0;
        let mut prev = Self::build_at(d, radius, m)?;
        loop {
            if m >= PSI_M_MAX {
                return Err(CoefficientsError::NoConvergence {
                    tol,
                    resolution: m,
                    last_diff: f64::NAN,
                });
            }
            m *= 2;
            let cur = Self::build_at(d, radius, m)?;
            let diff = prev
                .values
                .iter()
                .zip(&cur.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if diff < tol {
                return Ok(cur);
            }
            prev = cur;
        }
    }

    /// Tabulate at a fixed quadrature resolution, no refinement.
    pub fn build_at(d: usize, radius: i64, m: u32) -> Result<Self, CoefficientsError> {
        check_dim(d)?;
        assert!(radius >= 1);
        let offsets = Self::offsets(d, radius);
        let eval_all = |m: u32| -> Result<Vec<f64>, CoefficientsError> {
            check_resolution(m)?;
            let ax = AxisSamples::new(m);
            let mut vals = vec![0.0; offsets.len() * d];
            for (oi, &v) in offsets.iter().enumerate() {
                // integrate only v > 0 lexicographically; mirror the rest
                if Self::lex_positive(v, d) {
                    let p = psi_eval_with(d, v, &ax);
                    vals[oi * d..oi * d + d].copy_from_slice(&p[..d]);
                }
            }
            for (oi, &v) in offsets.iter().enumerate() {
                if !Self::lex_positive(v, d) && v[..d].iter().any(|&c| c != 0) {
                    let neg = [-v[0], -v[1], -v[2]];
                    let src = Self::offset_index(neg, radius, d).unwrap();
                    for j in 0..d {
                        vals[oi * d + j] = -vals[src * d + j];
                    }
                }
            }
            Ok(vals)
        };
        Ok(PsiTable { d, radius, resolution: m, values: eval_all(m)? })
    }

    fn offsets(d: usize, radius: i64) -> Vec<[i64; 3]> {
        let side = 2 * radius + 1;
        let mut out = Vec::with_capacity((side as usize).pow(d as u32));
        match d {
            2 => {
                for v2 in -radius..=radius {
                    for v1 in -radius..=radius {
                        out.push([v1, v2, 0]);
                    }
                }
            }
            _ => {
                for v3 in -radius..=radius {
                    for v2 in -radius..=radius {
                        for v1 in -radius..=radius {
                            out.push([v1, v2, v3]);
                        }
                    }
                }
            }
        }
        out
    }

    fn lex_positive(v: [i64; 3], d: usize) -> bool {
        for k in (0..d).rev() {
            if v[k] != 0 {
                return v[k] > 0;
            }
        }
        false
    }

    fn offset_index(v: [i64; 3], radius: i64, d: usize) -> Option<usize> {
        let side = 2 * radius + 1;
        let mut idx = 0i64;
        for k in (0..d).rev() {
            if v[k].abs() > radius {
                return None;
            }
            idx = idx * side + (v[k] + radius);
        }
        Some(idx as usize)
    }

    /// All components `psi_j(v)`; `None` outside the tabulated cube.
    pub fn get(&self, v: [i64; 3]) -> Option<[f64; 3]> {
        let mut probe = v;
        probe[self.d..].iter_mut().for_each(|c| *c = 0);
        if self.d == 2 && v[2] != 0 {
            return None;
        }
        let idx = Self::offset_index(probe, self.radius, self.d)?;
        let mut out = [0.0; 3];
        out[..self.d].copy_from_slice(&self.values[idx * self.d..idx * self.d + self.d]);
        Some(out)
    }

    /// Single component `psi_j(v)`.
    pub fn psi(&self, j: usize, v: [i64; 3]) -> Result<f64, CoefficientsError> {
        assert!(j < self.d);
        self.get(v)
            .map(|p| p[j])
            .ok_or(CoefficientsError::OutsideTable(v, self.radius))
    }

    /// All tabulated offsets in storage order (row-major over the cube,
    /// first axis fastest), for ergonomic iteration and export.
    pub fn offsets_list(&self) -> Vec<[i64; 3]> {
        Self::offsets(self.d, self.radius)
    }
}

/// Collision weight `gamma(Da, Db) = 2 Da / (Da + Db)`.
pub fn gamma(d_a: f64, d_b: f64) -> f64 {
    assert!(d_a > 0.0 && d_b > 0.0, "diffusivities must be positive");
    2.0 * d_a / (d_a + d_b)
}

/// Variants of the scalar interaction factor `mu`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuVariant {
    /// `mu(rho) = (1 - rho)(1 - alpha gamma rho)`
    Standard,
    /// `mu(rho) = (1 - rho)(1 - alpha gamma (1 - rho) rho)`; keeps the
    /// factored mobility positive semidefinite at every diffusivity ratio.
    Spd,
}

/// Cross-interaction mobility factor entering the factored two-species flux.
pub fn mu(rho: f64, alpha: f64, gam: f64, variant: MuVariant) -> Result<f64, CoefficientsError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(CoefficientsError::OutOfRange { what: "rho", value: rho, range: "[0,1]" });
    }
    let damp = match variant {
        MuVariant::Standard => 1.0,
        MuVariant::Spd => 1.0 - rho,
    };
    Ok((1.0 - rho) * (1.0 - alpha * damp * gam * rho))
}

/// Closed-form approximations for the tracer self-diffusion coefficient,
/// normalised so each returns `D` at vanishing density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfDiffusionModel {
    /// `D (1 - phi)`: crowding only, no correlation correction.
    MeanField,
    /// `D (1 - (1 + alpha) phi)`: exact slope at `phi -> 0`.
    LowDensity,
    /// `D (1 - phi) / (2 alpha + 1)`: exact slope at `phi -> 1`.
    HighDensity,
    /// Cubic interpolation matching value and slope at both endpoints:
    /// `D (1 - phi)(1 - alpha phi + alpha (2 alpha - 1) / (2 alpha + 1) phi^2)`.
    Composite,
}

/// Tracer self-diffusion coefficient among same-species background at
/// occupied fraction `phi`.
pub fn self_diffusion(
    model: SelfDiffusionModel,
    alpha: f64,
    d_coef: f64,
    phi: f64,
) -> Result<f64, CoefficientsError> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(CoefficientsError::OutOfRange { what: "phi", value: phi, range: "[0,1]" });
    }
    Ok(d_coef * self_diffusion_unit(model, alpha, phi))
}

#[inline]
pub(crate) fn self_diffusion_unit(model: SelfDiffusionModel, alpha: f64, phi: f64) -> f64 {
    match model {
        SelfDiffusionModel::MeanField => 1.0 - phi,
        SelfDiffusionModel::LowDensity => 1.0 - (1.0 + alpha) * phi,
        SelfDiffusionModel::HighDensity => (1.0 - phi) / (2.0 * alpha + 1.0),
        SelfDiffusionModel::Composite => {
            let c = alpha * (2.0 * alpha - 1.0) / (2.0 * alpha + 1.0);
            (1.0 - phi) * (1.0 - alpha * phi + c * phi * phi)
        }
    }
}

/// Dilute-limit self-diffusion of a tagged particle with diffusivity
/// `d_tagged` in a mixed background: each background component contributes
/// `(1 + alpha gamma(d_tagged, D_s)) phi_s` of slowdown.
pub fn mixture_self_diffusion(
    alpha: f64,
    d_tagged: f64,
    background: &[(f64, f64)],
) -> Result<f64, CoefficientsError> {
    let mut slowdown = 0.0;
    let mut phi_total = 0.0;
    for &(d_s, phi_s) in background {
        if !(0.0..=1.0).contains(&phi_s) {
            return Err(CoefficientsError::OutOfRange { what: "phi", value: phi_s, range: "[0,1]" });
        }
        phi_total += phi_s;
        slowdown += (1.0 + alpha * gamma(d_tagged, d_s)) * phi_s;
    }
    if phi_total > 1.0 {
        return Err(CoefficientsError::OutOfRange {
            what: "total phi",
            value: phi_total,
            range: "[0,1]",
        });
    }
    Ok(d_tagged * (1.0 - slowdown))
}

/// The two first-order closure functions proportional to `psi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiVariant {
    /// Dilute-limit closure, `chi = (1 + alpha)/2 psi_k`; solves
    /// `2 lap chi(v) = [v_k - 2 chi(v)] 1{|v| = 1}` with `chi(0) = 0`.
    LowDensity,
    /// Crowded-limit closure, `chi = (1 + alpha)/(1 + 2 alpha) psi_k`; solves
    /// `lap chi(v) = [v_k - chi(-v)] 1{|v| = 1}` with `chi(0) = 0`.
    HighDensity,
}

pub fn chi_scale(variant: ChiVariant, alpha: f64) -> f64 {
    match variant {
        ChiVariant::LowDensity => (1.0 + alpha) / 2.0,
        ChiVariant::HighDensity => (1.0 + alpha) / (1.0 + 2.0 * alpha),
    }
}

/// `chi_j(v)` for all components, from a prebuilt `psi` table.
pub fn chi_eval(
    variant: ChiVariant,
    alpha: f64,
    table: &PsiTable,
    v: [i64; 3],
) -> Result<[f64; 3], CoefficientsError> {
    let p = table.get(v).ok_or(CoefficientsError::OutsideTable(v, table.radius))?;
    let s = chi_scale(variant, alpha);
    Ok([s * p[0], s * p[1], s * p[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    // closed forms for d = 2
    fn alpha2() -> f64 {
        PI / 2.0 - 1.0
    }
    fn beta2() -> f64 {
        -(PI - 2.0) / PI
    }

    #[test]
    fn beta_alpha_d2_match_closed_forms() {
        let c = compute_beta_alpha(2).unwrap();
        assert_abs_diff_eq!(c.beta, beta2(), epsilon = 1e-10);
        assert_abs_diff_eq!(c.alpha, alpha2(), epsilon = 1e-10);
        assert!(c.resolution <= 1024);
    }

    #[test]
    fn beta_alpha_d3_match_reference() {
        // reference from the same rule at M = 384, error ~ 4e-12
        let c = compute_beta_alpha(3).unwrap();
        assert_abs_diff_eq!(c.alpha, 0.265569182875087, epsilon = 1e-9);
        assert_abs_diff_eq!(c.beta, -0.209841695316706, epsilon = 1e-9);
    }

    #[test]
    fn alpha_beta_are_consistent() {
        for d in [2, 3] {
            let c = compute_beta_alpha(d).unwrap();
            assert!(c.beta > -1.0 && c.beta < 0.0);
            assert_abs_diff_eq!(c.alpha, -c.beta / (1.0 + c.beta), epsilon = 1e-15);
            assert_abs_diff_eq!(c.beta, -c.alpha / (1.0 + c.alpha), epsilon = 1e-15);
        }
    }

    #[test]
    fn unreachable_tolerance_reports_no_convergence() {
        let r = compute_beta_alpha_with(2, 1e-18, 128);
        assert!(matches!(r, Err(CoefficientsError::NoConvergence { .. })));
    }

    #[test]
    fn odd_resolution_rejected() {
        assert!(matches!(beta_quadrature(2, 15), Err(CoefficientsError::BadResolution(15))));
        assert!(matches!(psi_eval(2, [1, 0, 0], 0), Err(CoefficientsError::BadResolution(0))));
        assert!(matches!(beta_quadrature(4, 16), Err(CoefficientsError::BadDimension(4))));
    }

    #[test]
    fn psi_identities_d2() {
        let p0 = psi_eval(2, [0, 0, 0], 512).unwrap();
        assert!(p0[0].abs() < 1e-15 && p0[1].abs() < 1e-15);
        let p = psi_eval(2, [1, 0, 0], 512).unwrap();
        assert_abs_diff_eq!(p[0], beta2(), epsilon = 1e-9);
        assert!(p[1].abs() < 1e-15);
        let q = psi_eval(2, [0, 1, 0], 512).unwrap();
        assert!(q[0].abs() < 1e-15);
        assert_abs_diff_eq!(q[1], beta2(), epsilon = 1e-9);
    }

    #[test]
    fn psi_known_values_d2() {
        // exact values implied by the defining difference equation:
        // psi_1(1,1) = (pi - 4)/(2 pi), psi_1(2,0) = 12/pi - 4
        let p11 = psi_eval(2, [1, 1, 0], 512).unwrap()[0];
        assert_abs_diff_eq!(p11, (PI - 4.0) / (2.0 * PI), epsilon = 1e-9);
        let p20 = psi_eval(2, [2, 0, 0], 512).unwrap()[0];
        assert_abs_diff_eq!(p20, 12.0 / PI - 4.0, epsilon = 1e-9);
        // independently computed reference values (midpoint M = 2048)
        assert_abs_diff_eq!(
            psi_eval(2, [2, 1, 0], 512).unwrap()[0],
            -0.122065907892194,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            psi_eval(2, [3, 0, 0], 512).unwrap()[0],
            -0.113613419764191,
            epsilon = 1e-8
        );
        // node-symmetry identity of the quadrature: psi_1(1,0) + psi_1(1,1) = -1/2
        let p10 = psi_eval(2, [1, 0, 0], 512).unwrap()[0];
        assert_abs_diff_eq!(p10 + p11, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn psi_identities_d3() {
        let p = psi_eval(3, [1, 0, 0], 128).unwrap();
        assert_abs_diff_eq!(p[0], -0.209841695316706, epsilon = 1e-8);
        assert!(p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
        let q = psi_eval(3, [0, 0, 1], 128).unwrap();
        assert_abs_diff_eq!(q[2], -0.209841695316706, epsilon = 1e-8);
    }

    fn lap_minus_source(table: &PsiTable, j: usize, v: [i64; 3]) -> f64 {
        let d = table.d;
        let mut lap = -2.0 * d as f64 * table.psi(j, v).unwrap();
        for k in 0..d {
            for s in [-1i64, 1] {
                let mut w = v;
                w[k] += s;
                lap += table.psi(j, w).unwrap();
            }
        }
        let norm1: i64 = v.iter().map(|c| c.abs()).sum();
        let source = if norm1 == 1 { v[j] as f64 } else { 0.0 };
        lap - source
    }

    #[test]
    fn psi_solves_discrete_poisson_problem() {
        // The residual of the defining equation is a trigonometric-polynomial
        // identity of the midpoint rule, exact at any even resolution, so a
        // coarse rule suffices here.
        for d in [2usize, 3] {
            let table = PsiTable::build_at(d, 4, 64).unwrap();
            for &v in PsiTable::offsets(d, 3).iter() {
                if v[..d].iter().map(|c| c * c).sum::<i64>() > 9 {
                    continue;
                }
                for j in 0..d {
                    assert!(
                        lap_minus_source(&table, j, v).abs() < 1e-10,
                        "residual at {v:?} component {j}"
                    );
                }
            }
        }
    }

    #[test]
    fn psi_table_matches_pointwise_eval_and_is_antisymmetric() {
        let t = PsiTable::build_with(2, 3, 1e-8).unwrap();
        for &v in PsiTable::offsets(2, 3).iter() {
            let direct = psi_eval(2, v, t.resolution).unwrap();
            let tab = t.get(v).unwrap();
            let neg = t.get([-v[0], -v[1], 0]).unwrap();
            for j in 0..2 {
                assert_abs_diff_eq!(tab[j], direct[j], epsilon = 1e-13);
                assert_eq!(tab[j], -neg[j], "exact antisymmetry at {v:?}");
            }
        }
        assert!(t.get([4, 0, 0]).is_none());
        assert!(t.get([0, 0, 1]).is_none());
    }

    #[test]
    fn psi_table_unit_offsets_match_beta() {
        let t = PsiTable::build_with(2, 2, 1e-8).unwrap();
        assert_abs_diff_eq!(t.psi(0, [1, 0, 0]).unwrap(), beta2(), epsilon = 1e-8);
        assert_abs_diff_eq!(t.psi(1, [0, -1, 0]).unwrap(), -beta2(), epsilon = 1e-8);
        assert_eq!(t.psi(0, [0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn gamma_values_and_symmetry() {
        assert_eq!(gamma(1.0, 1.0), 1.0);
        assert_eq!(gamma(1.5, 0.5), 1.5);
        for (a, b) in [(0.25, 1.75), (2.0, 3.0), (1e-3, 1.0)] {
            assert_abs_diff_eq!(gamma(a, b) + gamma(b, a), 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn mu_reference_values() {
        let a = alpha2();
        assert_abs_diff_eq!(
            mu(0.25, a, 1.0, MuVariant::Standard).unwrap(),
            0.6429756887259569,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            mu(0.25, a, 1.0, MuVariant::Spd).unwrap(),
            0.6697317665444676,
            epsilon = 1e-15
        );
        assert_eq!(mu(0.0, a, 1.0, MuVariant::Standard).unwrap(), 1.0);
        assert_eq!(mu(1.0, a, 1.0, MuVariant::Standard).unwrap(), 0.0);
        assert!(mu(1.2, a, 1.0, MuVariant::Standard).is_err());
    }

    #[test]
    fn self_diffusion_reference_values() {
        let a = alpha2();
        use SelfDiffusionModel::*;
        assert_abs_diff_eq!(
            self_diffusion(Composite, a, 1.0, 0.5).unwrap(),
            0.3620182350161704,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            self_diffusion(Composite, a, 1.0, 0.1).unwrap(),
            0.8489679773919317,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            self_diffusion(LowDensity, a, 1.0, 0.1).unwrap(),
            0.8429203673205103,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            self_diffusion(HighDensity, a, 1.0, 0.5).unwrap(),
            0.23347110346212993,
            epsilon = 1e-15
        );
        assert_eq!(self_diffusion(MeanField, a, 2.0, 0.25).unwrap(), 1.5);
        assert!(self_diffusion(Composite, a, 1.0, -0.1).is_err());
        assert!(self_diffusion(Composite, a, 1.0, 1.1).is_err());
    }

    #[test]
    fn composite_endpoints_and_slopes() {
        let a = alpha2();
        let f = |p: f64| self_diffusion_unit(SelfDiffusionModel::Composite, a, p);
        assert_eq!(f(0.0), 1.0);
        assert_eq!(f(1.0), 0.0);
        let eps = 1e-7;
        let slope0 = (f(eps) - f(0.0)) / eps;
        assert_abs_diff_eq!(slope0, -(1.0 + a), epsilon = 1e-6);
        let slope1 = (f(1.0) - f(1.0 - eps)) / eps;
        assert_abs_diff_eq!(slope1, -1.0 / (2.0 * a + 1.0), epsilon = 1e-6);
        // monotone decreasing and sandwiched between the limit laws on (0,1)
        let mut prev = 1.0;
        for i in 1..=100 {
            let p = i as f64 / 100.0;
            let v = f(p);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn mixture_collapses_to_single_species_when_equal() {
        let a = alpha2();
        for phi in [0.05, 0.1, 0.2] {
            let mixed = mixture_self_diffusion(a, 1.0, &[(1.0, phi / 2.0), (1.0, phi / 2.0)])
                .unwrap();
            let single = self_diffusion(SelfDiffusionModel::LowDensity, a, 1.0, phi).unwrap();
            assert_abs_diff_eq!(mixed, single, epsilon = 1e-15);
        }
    }

    #[test]
    fn mixture_reference_values() {
        let a = alpha2();
        // D_r + D_b = 2 grid at phi_r = phi_b = 0.1
        for (d_r, want) in [
            (0.25, 0.1821626147876595),
            (0.5, 0.35719027549038274),
            (1.0, 0.6858407346410207),
            (1.5, 0.9859513774519139),
            (1.75, 1.1253042677299558),
        ] {
            let d_b = 2.0 - d_r;
            let got = mixture_self_diffusion(a, d_r, &[(d_r, 0.1), (d_b, 0.1)]).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-15);
        }
        assert!(mixture_self_diffusion(a, 1.0, &[(1.0, 0.7), (1.0, 0.6)]).is_err());
    }

    #[test]
    fn chi_solves_its_difference_equations() {
        // Machine-exact at any even resolution, like the psi residual — but
        // only when alpha is paired with beta from the same rule, so derive it
        // from the table itself.
        let table = PsiTable::build_at(2, 3, 64).unwrap();
        let beta_m = table.psi(0, [1, 0, 0]).unwrap();
        let a = -beta_m / (1.0 + beta_m);
        for &v in PsiTable::offsets(2, 2).iter() {
            let norm1: i64 = v.iter().map(|c| c.abs()).sum();
            let on_shell = norm1 == 1;
            for j in 0..2 {
                let lap = |scale: f64, w: [i64; 3]| -> f64 {
                    let mut l = -4.0 * scale * table.psi(j, w).unwrap();
                    for k in 0..2 {
                        for s in [-1i64, 1] {
                            let mut u = w;
                            u[k] += s;
                            l += scale * table.psi(j, u).unwrap();
                        }
                    }
                    l
                };
                let c_low = chi_eval(ChiVariant::LowDensity, a, &table, v).unwrap()[j];
                let rhs_low = if on_shell { v[j] as f64 - 2.0 * c_low } else { 0.0 };
                let r_low = 2.0 * lap(chi_scale(ChiVariant::LowDensity, a), v) - rhs_low;
                assert!(r_low.abs() < 1e-8, "dilute closure residual {r_low:e} at {v:?}");

                let c_hi_neg =
                    chi_eval(ChiVariant::HighDensity, a, &table, [-v[0], -v[1], 0]).unwrap()[j];
                let rhs_hi = if on_shell { v[j] as f64 - c_hi_neg } else { 0.0 };
                let r_hi = lap(chi_scale(ChiVariant::HighDensity, a), v) - rhs_hi;
                assert!(r_hi.abs() < 1e-8, "crowded closure residual {r_hi:e} at {v:?}");
            }
        }
    }

    #[test]
    fn chi_scales() {
        let a = alpha2();
        assert_abs_diff_eq!(chi_scale(ChiVariant::LowDensity, a), (1.0 + a) / 2.0, epsilon = 0.0);
        assert_abs_diff_eq!(
            chi_scale(ChiVariant::HighDensity, a),
            (1.0 + a) / (1.0 + 2.0 * a),
            epsilon = 0.0
        );
    }
}
