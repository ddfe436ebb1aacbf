//! Polarimetric BRDF representations: Mueller-matrix tables over the
//! Rusinkiewicz half/difference angles, the analytic dielectric/metal
//! model, intensity/polarization factorization, parameter fitting, and the
//! pseudo-measured material generator.
//!
//! Table convention. Cells are indexed by (θ_h, θ_d, φ_d, λ) with uniform
//! grids θ_h, θ_d ∈ [0, π/2] and φ_d ∈ [0, π]; configurations with
//! negative φ_d are evaluated by mirror symmetry (conjugation with
//! diag(1,1,−1,−1)). Stored Mueller matrices are expressed in
//! scattering-plane bases: for each beam, the basis x-axis is the in-plane
//! direction ŝ × d with ŝ = normalize(ω_i × ω_o) and d the direction of
//! travel. Cells whose reconstructed directions fall below the horizon are
//! zero.

mod analytic;
mod fit;
mod pseudo;

pub use analytic::{
    analytic_eval, analytic_eval_generic, analytic_eval_world, analytic_m00, analytic_m00_world,
    conductor_ior, fresnel_reflection_mueller, scattering_bases, tabulate_analytic, AnalyticOpts,
    AnalyticParams, DIELECTRIC_IOR,
};
pub use fit::{fit_pbr_params, FitOutcome};
pub use pseudo::generate_pseudo_measured_set;

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::polarimetry::Mueller;
use std::f64::consts::{FRAC_PI_2, PI};

/// Disney-style PBR parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PBRParams {
    /// RGB albedo in [0,1]³.
    pub albedo: [f64; 3],
    /// Roughness in (0,1].
    pub roughness: f64,
    /// Metallicity in [0,1].
    pub metallic: f64,
    /// Complex index of refraction per channel for the metal lobe;
    /// derived from the albedo via the conductor family when absent.
    pub conductor_ior: Option<[(f64, f64); 3]>,
}

impl PBRParams {
    pub fn new(albedo: [f64; 3], roughness: f64, metallic: f64) -> Self {
        PBRParams { albedo, roughness, metallic, conductor_ior: None }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, k) in self.albedo.iter().enumerate() {
            if !(0.0..=1.0).contains(k) {
                return Err(Error::Domain(format!("albedo[{i}] = {k} outside [0,1]")));
            }
        }
        if !(self.roughness > 0.0 && self.roughness <= 1.0) {
            return Err(Error::Domain(format!("roughness = {} outside (0,1]", self.roughness)));
        }
        if !(0.0..=1.0).contains(&self.metallic) {
            return Err(Error::Domain(format!("metallic = {} outside [0,1]", self.metallic)));
        }
        Ok(())
    }
}

/// Default spectral band centers (nm) for the three RGB channels.
pub const DEFAULT_BAND_CENTERS_NM: [f32; 3] = [610.0, 530.0, 465.0];

/// Default tabulation grid (θ_h × θ_d × φ_d).
pub const DEFAULT_GRID: (usize, usize, usize) = (32, 16, 16);

/// Tabulated Mueller-matrix reflectance over Rusinkiewicz angles and
/// spectral bands.
#[derive(Debug, Clone, PartialEq)]
pub struct PBRDFTable {
    pub n_theta_h: usize,
    pub n_theta_d: usize,
    pub n_phi_d: usize,
    pub band_centers_nm: Vec<f32>,
    /// Layout: `((th · n_theta_d + td) · n_phi_d + pd) · n_lambda + l`.
    cells: Vec<Mueller>,
}

impl PBRDFTable {
    pub fn zeroed(
        n_theta_h: usize,
        n_theta_d: usize,
        n_phi_d: usize,
        band_centers_nm: Vec<f32>,
    ) -> Result<Self> {
        if n_theta_h < 2 || n_theta_d < 2 || n_phi_d < 2 {
            return Err(Error::Config(format!(
                "grid sizes must be at least 2 per axis, got {n_theta_h}x{n_theta_d}x{n_phi_d}"
            )));
        }
        if band_centers_nm.is_empty() {
            return Err(Error::Config("at least one spectral band required".into()));
        }
        let n = n_theta_h * n_theta_d * n_phi_d * band_centers_nm.len();
        Ok(PBRDFTable {
            n_theta_h,
            n_theta_d,
            n_phi_d,
            band_centers_nm,
            cells: vec![Mueller::zero(); n],
        })
    }

    pub fn n_lambda(&self) -> usize {
        self.band_centers_nm.len()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Cells per band (angular grid size).
    pub fn angular_cells(&self) -> usize {
        self.n_theta_h * self.n_theta_d * self.n_phi_d
    }

    pub fn cell_index(&self, th: usize, td: usize, pd: usize, l: usize) -> usize {
        ((th * self.n_theta_d + td) * self.n_phi_d + pd) * self.n_lambda() + l
    }

    pub fn cell(&self, th: usize, td: usize, pd: usize, l: usize) -> &Mueller {
        &self.cells[self.cell_index(th, td, pd, l)]
    }

    pub fn cell_mut(&mut self, th: usize, td: usize, pd: usize, l: usize) -> &mut Mueller {
        let i = self.cell_index(th, td, pd, l);
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[Mueller] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [Mueller] {
        &mut self.cells
    }

    pub fn from_cells(
        n_theta_h: usize,
        n_theta_d: usize,
        n_phi_d: usize,
        band_centers_nm: Vec<f32>,
        cells: Vec<Mueller>,
    ) -> Result<Self> {
        let mut t = Self::zeroed(n_theta_h, n_theta_d, n_phi_d, band_centers_nm)?;
        if cells.len() != t.cells.len() {
            return Err(Error::shape(format!("{} cells", t.cells.len()), format!("{}", cells.len())));
        }
        t.cells = cells;
        Ok(t)
    }

    /// Grid node angles.
    pub fn theta_h(&self, i: usize) -> f64 {
        FRAC_PI_2 * i as f64 / (self.n_theta_h - 1) as f64
    }

    pub fn theta_d(&self, i: usize) -> f64 {
        FRAC_PI_2 * i as f64 / (self.n_theta_d - 1) as f64
    }

    pub fn phi_d(&self, i: usize) -> f64 {
        PI * i as f64 / (self.n_phi_d - 1) as f64
    }

    /// Representative (ω_i, ω_o) pair of a grid node in the local frame
    /// (half vector placed in the x–z plane). Returns None when either
    /// direction falls below the horizon.
    pub fn node_directions(&self, th: usize, td: usize, pd: usize) -> Option<(Vec3, Vec3)> {
        let (wi, wo) = rusinkiewicz_directions(self.theta_h(th), self.theta_d(td), self.phi_d(pd));
        if wi.z <= 1e-9 || wo.z <= 1e-9 {
            None
        } else {
            Some((wi, wo))
        }
    }

    /// Trilinear interpolation at a direction pair in the local frame with
    /// the scattering-plane basis convention. Below-horizon directions are
    /// a domain error.
    pub fn eval(&self, omega_i: Vec3, omega_o: Vec3, band: usize) -> Result<Mueller> {
        if band >= self.n_lambda() {
            return Err(Error::Domain(format!("band {band} out of range")));
        }
        if omega_i.z <= 0.0 || omega_o.z <= 0.0 {
            return Err(Error::Domain("direction below the horizon".into()));
        }
        let (theta_h, theta_d, phi_d, mirrored) = rusinkiewicz_angles(omega_i, omega_o);

        let fx = theta_h / FRAC_PI_2 * (self.n_theta_h - 1) as f64;
        let fy = theta_d / FRAC_PI_2 * (self.n_theta_d - 1) as f64;
        let fz = phi_d / PI * (self.n_phi_d - 1) as f64;
        let (i0, wx) = split_index(fx, self.n_theta_h);
        let (j0, wy) = split_index(fy, self.n_theta_d);
        let (k0, wz) = split_index(fz, self.n_phi_d);

        let mut acc = Mueller::zero();
        for (di, wi_) in [(0usize, 1.0 - wx), (1, wx)] {
            if wi_ == 0.0 {
                continue;
            }
            for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                if wj == 0.0 {
                    continue;
                }
                for (dk, wk) in [(0usize, 1.0 - wz), (1, wz)] {
                    if wk == 0.0 {
                        continue;
                    }
                    let c = self.cell(i0 + di, j0 + dj, k0 + dk, band);
                    acc = acc.add(&c.scale(wi_ * wj * wk));
                }
            }
        }
        if mirrored {
            acc = mirror_conjugate(&acc);
        }
        Ok(acc)
    }
}

fn split_index(f: f64, n: usize) -> (usize, f64) {
    let f = f.clamp(0.0, (n - 1) as f64);
    let i = (f.floor() as usize).min(n - 2);
    (i, f - i as f64)
}

/// Mirror conjugation diag(1,1,−1,−1) · M · diag(1,1,−1,−1).
pub fn mirror_conjugate(m: &Mueller) -> Mueller {
    let p = [1.0, 1.0, -1.0, -1.0];
    let mut r = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            r[i][j] = p[i] * m.m[i][j] * p[j];
        }
    }
    Mueller::from_rows(r)
}

/// Forward Rusinkiewicz transform: (θ_h, θ_d, φ_d ∈ [0, π], mirrored).
pub fn rusinkiewicz_angles(omega_i: Vec3, omega_o: Vec3) -> (f64, f64, f64, bool) {
    let h = (omega_i + omega_o).normalized();
    let theta_h = h.z.clamp(-1.0, 1.0).acos();
    let phi_h = if h.x.abs() + h.y.abs() > 1e-12 { h.y.atan2(h.x) } else { 0.0 };

    // d = rot_y(−θ_h) · rot_z(−φ_h) · ω_i
    let (sph, cph) = phi_h.sin_cos();
    let tmp = Vec3::new(
        cph * omega_i.x + sph * omega_i.y,
        -sph * omega_i.x + cph * omega_i.y,
        omega_i.z,
    );
    let (sth, cth) = theta_h.sin_cos();
    let d = Vec3::new(cth * tmp.x - sth * tmp.z, tmp.y, sth * tmp.x + cth * tmp.z);

    let theta_d = d.z.clamp(-1.0, 1.0).acos();
    let mut phi_d = if d.x.abs() + d.y.abs() > 1e-12 { d.y.atan2(d.x) } else { 0.0 };
    let mut mirrored = false;
    if phi_d < 0.0 {
        phi_d = -phi_d;
        mirrored = true;
    }
    (theta_h.clamp(0.0, FRAC_PI_2), theta_d.clamp(0.0, FRAC_PI_2), phi_d.min(PI), mirrored)
}

/// Inverse Rusinkiewicz transform: representative (ω_i, ω_o) with the half
/// vector in the x–z plane.
pub fn rusinkiewicz_directions(theta_h: f64, theta_d: f64, phi_d: f64) -> (Vec3, Vec3) {
    let (std_, ctd) = theta_d.sin_cos();
    let (spd, cpd) = phi_d.sin_cos();
    let d = Vec3::new(std_ * cpd, std_ * spd, ctd);
    // ω_i = rot_y(θ_h) · d  (φ_h = 0)
    let (sth, cth) = theta_h.sin_cos();
    let wi = Vec3::new(cth * d.x + sth * d.z, d.y, -sth * d.x + cth * d.z);
    let h = Vec3::new(sth, 0.0, cth);
    let wo = h * (2.0 * wi.dot(h)) - wi;
    (wi, wo)
}

/// Floor below which a cell's intensity is treated as empty and its
/// polarimetric part replaced by the identity placeholder.
pub const FACTORIZE_M00_FLOOR: f64 = 1e-8;

/// Intensity/polarization factorization of a table: per cell
/// (m00, M / m00); cells with m00 at or below the floor are masked.
#[derive(Debug, Clone)]
pub struct FactorizedPBRDF {
    pub n_theta_h: usize,
    pub n_theta_d: usize,
    pub n_phi_d: usize,
    pub band_centers_nm: Vec<f32>,
    pub intensity: Vec<f64>,
    pub pol: Vec<Mueller>,
    pub masked: Vec<bool>,
}

/// Splits a table into its intensity component and normalized polarimetric
/// component.
pub fn factorize(t: &PBRDFTable) -> FactorizedPBRDF {
    let n = t.cell_count();
    let mut intensity = Vec::with_capacity(n);
    let mut pol = Vec::with_capacity(n);
    let mut masked = Vec::with_capacity(n);
    for c in t.cells() {
        let m00 = c.m[0][0];
        if m00 <= FACTORIZE_M00_FLOOR {
            intensity.push(m00.max(0.0));
            pol.push(Mueller::identity());
            masked.push(true);
        } else {
            intensity.push(m00);
            pol.push(c.scale(1.0 / m00));
            masked.push(false);
        }
    }
    FactorizedPBRDF {
        n_theta_h: t.n_theta_h,
        n_theta_d: t.n_theta_d,
        n_phi_d: t.n_phi_d,
        band_centers_nm: t.band_centers_nm.clone(),
        intensity,
        pol,
        masked,
    }
}

impl FactorizedPBRDF {
    /// Recombines M = m00 · M_pol into a table.
    pub fn recombine(&self) -> Result<PBRDFTable> {
        let cells: Vec<Mueller> = self
            .intensity
            .iter()
            .zip(&self.pol)
            .map(|(&m00, p)| p.scale(m00))
            .collect();
        PBRDFTable::from_cells(
            self.n_theta_h,
            self.n_theta_d,
            self.n_phi_d,
            self.band_centers_nm.clone(),
            cells,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_table() -> PBRDFTable {
        let mut t = PBRDFTable::zeroed(4, 3, 3, vec![550.0]).unwrap();
        for th in 0..4 {
            for td in 0..3 {
                for pd in 0..3 {
                    let v = 1.0 + th as f64 + 0.1 * td as f64 + 0.01 * pd as f64;
                    *t.cell_mut(th, td, pd, 0) = Mueller::diagonal([v, 0.5 * v, 0.25 * v, 0.1 * v]);
                }
            }
        }
        t
    }

    #[test]
    fn rusinkiewicz_round_trip() {
        for &(th, td, pd) in &[(0.3, 0.2, 0.5), (0.0, 0.4, 1.2), (1.2, 0.1, 3.0), (0.7, 0.0, 0.0)] {
            let (wi, wo) = rusinkiewicz_directions(th, td, pd);
            if wi.z <= 0.0 || wo.z <= 0.0 {
                continue;
            }
            let (th2, td2, pd2, mirrored) = rusinkiewicz_angles(wi, wo);
            assert!(!mirrored);
            assert_relative_eq!(th, th2, epsilon = 1e-9);
            assert_relative_eq!(td, td2, epsilon = 1e-9);
            if td > 1e-9 && th > 1e-9 {
                assert_relative_eq!(pd, pd2, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eval_at_node_returns_stored_matrix() {
        let t = toy_table();
        let (wi, wo) = t.node_directions(2, 1, 1).unwrap();
        let m = t.eval(wi, wo, 0).unwrap();
        let stored = t.cell(2, 1, 1, 0);
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(m.m[i][j], stored.m[i][j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eval_midway_is_arithmetic_mean() {
        let t = toy_table();
        // midway between θ_h nodes 1 and 2 at fixed (td=0, pd=0): use the
        // angle midpoint and exploit that φ_d is free when θ_d = 0
        let th_mid = 0.5 * (t.theta_h(1) + t.theta_h(2));
        let (wi, wo) = rusinkiewicz_directions(th_mid, 0.0, 0.0);
        let m = t.eval(wi, wo, 0).unwrap();
        // θ_d = 0 ⇒ the (td,pd) = (0,·) column; interpolation across φ_d is
        // degenerate at the pd=0 edge
        let a = t.cell(1, 0, 0, 0);
        let b = t.cell(2, 0, 0, 0);
        for i in 0..4 {
            let expect = 0.5 * (a.m[i][i] + b.m[i][i]);
            assert_relative_eq!(m.m[i][i], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn eval_rejects_below_horizon() {
        let t = toy_table();
        assert!(t.eval(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 1.0), 0).is_err());
        assert!(t.eval(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.1, 0.0, -0.9), 0).is_err());
    }

    #[test]
    fn factorize_basics() {
        let mut t = toy_table();
        *t.cell_mut(0, 0, 0, 0) = Mueller::identity().scale(2.0);
        *t.cell_mut(0, 0, 1, 0) = Mueller::zero();
        let f = factorize(&t);
        let i000 = t.cell_index(0, 0, 0, 0);
        assert_relative_eq!(f.intensity[i000], 2.0);
        assert_eq!(f.pol[i000], Mueller::identity());
        assert!(!f.masked[i000]);
        let i001 = t.cell_index(0, 0, 1, 0);
        assert!(f.masked[i001]);
        assert_eq!(f.pol[i001], Mueller::identity());
    }

    #[test]
    fn factorize_recombine_round_trip() {
        let t = toy_table();
        let f = factorize(&t);
        let back = f.recombine().unwrap();
        for (i, (a, b)) in t.cells().iter().zip(back.cells()).enumerate() {
            if f.masked[i] {
                continue;
            }
            for r in 0..4 {
                for c in 0..4 {
                    assert_relative_eq!(a.m[r][c], b.m[r][c], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn mirror_conjugation_is_involutive() {
        let m = Mueller::from_rows([
            [1.0, 0.1, 0.2, 0.3],
            [0.1, 0.9, 0.2, 0.1],
            [0.2, -0.2, 0.8, 0.4],
            [-0.3, 0.1, -0.4, 0.7],
        ]);
        assert_eq!(mirror_conjugate(&mirror_conjugate(&m)), m);
    }

    #[test]
    fn params_validation() {
        assert!(PBRParams::new([0.5, 0.5, 0.5], 0.5, 0.5).validate().is_ok());
        assert!(PBRParams::new([1.5, 0.5, 0.5], 0.5, 0.5).validate().is_err());
        assert!(PBRParams::new([0.5, 0.5, 0.5], 0.0, 0.5).validate().is_err());
        assert!(PBRParams::new([0.5, 0.5, 0.5], 0.5, -0.1).validate().is_err());
    }
}
