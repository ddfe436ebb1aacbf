//! Analytic dielectric/metal polarimetric BRDF.
//!
//! Two lobes. A diffuse lobe: ideal depolarizer carrying the albedo,
//! sandwiched between Fresnel transmissions into and out of the medium
//! (IOR 1.5), weighted by (1 − metallic). A specular GGX microfacet lobe
//! whose Fresnel reflection Mueller matrix blends linearly between the
//! dielectric (IOR 1.5) and a conductor whose complex IOR per channel is
//! interpolated from the albedo. Everything is generic over [`Real`] so
//! the fitter can push dual numbers through the full chain.
//!
//! Matrices are returned in the scattering-plane bases described in the
//! module docs of [`super`]: basis x-axis = ŝ × d per beam, basis y = ŝ.

use super::{PBRDFTable, PBRParams};
use crate::math::{
    gadd, gcross, gdot, gnorm, gnormalize, gscale, gvec, Cplx, GVec3, Real, Vec3,
};
use crate::polarimetry::{Mueller, MuellerMatrix};

/// Conductor family presets: (η, κ) at the dark and bright ends; the
/// per-channel IOR interpolates linearly with the channel albedo.
pub const CONDUCTOR_DARK: (f64, f64) = (2.9, 3.1);
pub const CONDUCTOR_BRIGHT: (f64, f64) = (0.96, 6.4);

/// Dielectric index of refraction for the specular lobe and the diffuse
/// transmission sandwich.
pub const DIELECTRIC_IOR: f64 = 1.5;

/// Lobe switches. Defaults enable everything; `fresnel_diffuse = false`
/// degrades the diffuse lobe to a pure Lambertian depolarizer.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticOpts {
    pub diffuse: bool,
    pub specular: bool,
    pub fresnel_diffuse: bool,
}

impl Default for AnalyticOpts {
    fn default() -> Self {
        AnalyticOpts { diffuse: true, specular: true, fresnel_diffuse: true }
    }
}

/// Per-channel conductor IOR from the channel albedo.
pub fn conductor_ior<R: Real>(albedo: R) -> Cplx<R> {
    let t = albedo.max(R::zero()).min(R::one());
    let eta = R::from_f64(CONDUCTOR_DARK.0) + t * R::from_f64(CONDUCTOR_BRIGHT.0 - CONDUCTOR_DARK.0);
    let kappa = R::from_f64(CONDUCTOR_DARK.1) + t * R::from_f64(CONDUCTOR_BRIGHT.1 - CONDUCTOR_DARK.1);
    Cplx::new(eta, kappa)
}

/// Material parameters lifted to a generic scalar.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticParams<R: Real> {
    pub albedo: [R; 3],
    pub roughness: R,
    pub metallic: R,
    pub eta_conductor: [Cplx<R>; 3],
}

impl<R: Real> AnalyticParams<R> {
    pub fn new(albedo: [R; 3], roughness: R, metallic: R) -> Self {
        let eta_conductor = [
            conductor_ior(albedo[0]),
            conductor_ior(albedo[1]),
            conductor_ior(albedo[2]),
        ];
        AnalyticParams { albedo, roughness, metallic, eta_conductor }
    }
}

impl From<&PBRParams> for AnalyticParams<f64> {
    fn from(p: &PBRParams) -> Self {
        let mut a = AnalyticParams::new(p.albedo, p.roughness, p.metallic);
        if let Some(ior) = p.conductor_ior {
            a.eta_conductor = [
                Cplx::new(ior[0].0, ior[0].1),
                Cplx::new(ior[1].0, ior[1].1),
                Cplx::new(ior[2].0, ior[2].1),
            ];
        }
        a
    }
}

/// Fresnel amplitude coefficients (r_s, r_p) at incidence cosine `c`
/// against a medium of complex index `eta` (from vacuum).
fn fresnel_rs_rp<R: Real>(c: R, eta: Cplx<R>) -> (Cplx<R>, Cplx<R>) {
    let c = c.max(R::zero()).min(R::one());
    let sin2 = R::one() - c * c;
    let eta2 = eta * eta;
    let w = (eta2 - Cplx::from_re(sin2)).sqrt();
    let cc = Cplx::from_re(c);
    let rs = (cc - w) / (cc + w);
    let rp = (eta2 * cc - w) / (eta2 * cc + w);
    (rs, rp)
}

/// Mueller matrix of Fresnel reflection at incidence cosine `c`, in the
/// (p̂, ŝ) bases of the plane of incidence.
pub fn fresnel_reflection_mueller<R: Real>(c: R, eta: Cplx<R>) -> MuellerMatrix<R> {
    let (rs, rp) = fresnel_rs_rp(c, eta);
    fresnel_mueller_from_amplitudes(rs, rp)
}

fn fresnel_mueller_from_amplitudes<R: Real>(rs: Cplx<R>, rp: Cplx<R>) -> MuellerMatrix<R> {
    let rss = rs.norm_sqr();
    let rpp = rp.norm_sqr();
    let cross = rp * rs.conj();
    let half = R::from_f64(0.5);
    let a = (rpp + rss) * half;
    let b = (rpp - rss) * half;
    let o = R::zero();
    MuellerMatrix::from_rows([
        [a, b, o, o],
        [b, a, o, o],
        [o, o, cross.re, cross.im],
        [o, o, -cross.im, cross.re],
    ])
}

/// Intensity halves of the Fresnel transmission at incidence cosine `c`
/// through a dielectric interface: ((T_p + T_s)/2, (T_p − T_s)/2).
fn transmission_halves<R: Real>(c: R, eta: R) -> (R, R) {
    let c = c.max(R::from_f64(1e-9)).min(R::one());
    let sin2 = R::one() - c * c;
    let w = (eta * eta - sin2).sqrt();
    let ts_den = c + w;
    let tp_den = eta * eta * c + w;
    let four = R::from_f64(4.0);
    let t_s = four * c * w / (ts_den * ts_den);
    let t_p = four * eta * eta * c * w / (tp_den * tp_den);
    let half = R::from_f64(0.5);
    ((t_p + t_s) * half, (t_p - t_s) * half)
}

/// GGX normal distribution × Smith shadowing-masking / (4 cosθ_i cosθ_o).
fn ggx_weight<R: Real>(cos_i: R, cos_o: R, cos_h: R, alpha: R) -> R {
    let a2 = alpha * alpha;
    let c2 = cos_h * cos_h;
    let d_den = c2 * (a2 - R::one()) + R::one();
    let d = a2 / (R::from_f64(std::f64::consts::PI) * d_den * d_den);
    let g1 = |cv: R| {
        let cv2 = cv * cv;
        R::from_f64(2.0) * cv / (cv + (a2 + (R::one() - a2) * cv2).sqrt())
    };
    let g = g1(cos_i) * g1(cos_o);
    d * g / (R::from_f64(4.0) * cos_i * cos_o)
}

/// Signed basis rotation angle, generic version of
/// [`crate::polarimetry::basis_rotation_angle`].
fn gbasis_rotation_angle<R: Real>(d: GVec3<R>, ex_from: GVec3<R>, ex_to: GVec3<R>) -> R {
    let sin = gdot(d, gcross(ex_from, ex_to));
    let cos = gdot(ex_from, ex_to);
    sin.atan2(cos)
}

/// Scattering-plane bases of a direction pair in the local frame:
/// (ŝ, p̂ of the incoming beam, p̂ of the outgoing beam). Falls back to a
/// deterministic transverse axis when the pair is collinear.
pub fn scattering_bases(omega_i: Vec3, omega_o: Vec3) -> (Vec3, Vec3, Vec3) {
    let cross = omega_i.cross(omega_o);
    let s_hat = if cross.norm() > 1e-9 {
        cross.normalized()
    } else {
        let aux = if omega_i.z.abs() < 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(1.0, 0.0, 0.0) };
        omega_i.cross(aux).normalized()
    };
    let p_i = s_hat.cross(-omega_i);
    let p_o = s_hat.cross(omega_o);
    (s_hat, p_i, p_o)
}

/// Full analytic Mueller evaluation with an explicit surface normal, all
/// vectors in one shared frame. The scattering-plane perpendicular `s_hat`
/// is supplied by the caller so all participants in a light path agree on
/// bases. Derivatives flow through the normal when instantiated with duals.
pub fn analytic_eval_world<R: Real>(
    p: &AnalyticParams<R>,
    normal: GVec3<R>,
    omega_i: GVec3<R>,
    omega_o: GVec3<R>,
    s_hat: GVec3<R>,
    band: usize,
    opts: AnalyticOpts,
) -> MuellerMatrix<R> {
    let cos_i = gdot(normal, omega_i);
    let cos_o = gdot(normal, omega_o);
    if cos_i.value() < 1e-6 || cos_o.value() < 1e-6 {
        return MuellerMatrix::zero();
    }
    let d_i = gscale(omega_i, -R::one());
    let d_o = omega_o;
    let p_i_scat = gcross(s_hat, d_i);
    let p_o_scat = gcross(s_hat, d_o);

    let mut out = MuellerMatrix::zero();
    let one = R::one();
    let eta_d = R::from_f64(DIELECTRIC_IOR);

    if opts.diffuse {
        let weight = (one - p.metallic).max(R::zero()) * p.albedo[band]
            * R::from_f64(std::f64::consts::FRAC_1_PI);
        if weight.value() > 0.0 {
            // rank-1 sandwich: out-column ⊗ in-row around the depolarizer
            let (mut a_vec, mut b_vec) = ([R::zero(); 4], [R::zero(); 4]);
            if opts.fresnel_diffuse {
                let (a_i, b_i) = transmission_halves(cos_i, eta_d);
                let (a_o, b_o) = transmission_halves(cos_o, eta_d);
                // incidence-plane bases; degenerate near normal incidence
                // where the polarizing term b vanishes anyway
                let c_i = gcross(omega_i, normal);
                let c_o = gcross(omega_o, normal);
                let chi_i = if gnorm(c_i).value() > 1e-9 {
                    let s_inc = gnormalize(c_i);
                    gbasis_rotation_angle(d_i, p_i_scat, gcross(s_inc, d_i))
                } else {
                    R::zero()
                };
                let chi_o = if gnorm(c_o).value() > 1e-9 {
                    let s_inc = gnormalize(c_o);
                    gbasis_rotation_angle(d_o, gcross(s_inc, d_o), p_o_scat)
                } else {
                    R::zero()
                };
                let two = R::from_f64(2.0);
                let (s_i, c_i2) = ((chi_i * two).sin(), (chi_i * two).cos());
                let (s_o, c_o2) = ((chi_o * two).sin(), (chi_o * two).cos());
                // in-row: [A_i, B_i, 0, 0] · R(χ_i); out-column: R(χ_o) · [A_o, B_o, 0, 0]ᵀ
                b_vec = [a_i, b_i * c_i2, b_i * s_i, R::zero()];
                a_vec = [a_o, c_o2 * b_o, -s_o * b_o, R::zero()];
            } else {
                a_vec[0] = one;
                b_vec[0] = one;
            }
            for i in 0..4 {
                for j in 0..4 {
                    out.m[i][j] += weight * a_vec[i] * b_vec[j];
                }
            }
        }
    }

    if opts.specular {
        let h = gnormalize(gadd(omega_i, omega_o));
        let cos_h = gdot(normal, h);
        if cos_h.value() > 1e-9 {
            let alpha = (p.roughness * p.roughness).max(R::from_f64(1e-6));
            let weight = ggx_weight(cos_i, cos_o, cos_h, alpha);
            let cos_d = gdot(omega_i, h).max(R::zero()).min(one);
            let m = p.metallic.max(R::zero()).min(one);
            let w_diel = one - m;
            if w_diel.value() > 0.0 {
                let f = fresnel_reflection_mueller(cos_d, Cplx::from_re(eta_d));
                accumulate_scaled(&mut out, &f, weight * w_diel);
            }
            if m.value() > 0.0 {
                let f = fresnel_reflection_mueller(cos_d, p.eta_conductor[band]);
                accumulate_scaled(&mut out, &f, weight * m);
            }
        }
    }

    out
}

/// Local-frame evaluation (normal = +z).
pub fn analytic_eval_generic<R: Real>(
    p: &AnalyticParams<R>,
    omega_i: GVec3<R>,
    omega_o: GVec3<R>,
    s_hat: GVec3<R>,
    band: usize,
    opts: AnalyticOpts,
) -> MuellerMatrix<R> {
    let z = [R::zero(), R::zero(), R::one()];
    analytic_eval_world(p, z, omega_i, omega_o, s_hat, band, opts)
}

fn accumulate_scaled<R: Real>(dst: &mut MuellerMatrix<R>, src: &MuellerMatrix<R>, k: R) {
    for i in 0..4 {
        for j in 0..4 {
            dst.m[i][j] += src.m[i][j] * k;
        }
    }
}

/// Convenience f64 evaluation with self-computed bases.
pub fn analytic_eval(p: &PBRParams, omega_i: Vec3, omega_o: Vec3, band: usize, opts: AnalyticOpts) -> Mueller {
    let (s_hat, _, _) = scattering_bases(omega_i, omega_o);
    let ap = AnalyticParams::from(p);
    analytic_eval_generic(&ap, gvec(omega_i), gvec(omega_o), gvec(s_hat), band, opts)
}

/// Intensity (m00) of the analytic model with an explicit normal; cheap
/// path used by the parameter fitter, relighting, and the energy checks.
/// Agrees with the (0,0) entry of the full evaluation exactly: rotations
/// do not touch m00 and the depolarizer sandwich contributes the plain
/// product of transmission means.
pub fn analytic_m00_world<R: Real>(
    p: &AnalyticParams<R>,
    normal: GVec3<R>,
    omega_i: GVec3<R>,
    omega_o: GVec3<R>,
    band: usize,
    opts: AnalyticOpts,
) -> R {
    let cos_i = gdot(normal, omega_i);
    let cos_o = gdot(normal, omega_o);
    if cos_i.value() < 1e-6 || cos_o.value() < 1e-6 {
        return R::zero();
    }
    let one = R::one();
    let mut m00 = R::zero();
    if opts.diffuse {
        let weight = (one - p.metallic).max(R::zero()) * p.albedo[band]
            * R::from_f64(std::f64::consts::FRAC_1_PI);
        if opts.fresnel_diffuse {
            let eta = R::from_f64(DIELECTRIC_IOR);
            let (a_i, _) = transmission_halves(cos_i, eta);
            let (a_o, _) = transmission_halves(cos_o, eta);
            m00 += weight * a_i * a_o;
        } else {
            m00 += weight;
        }
    }
    if opts.specular {
        let h = gnormalize(gadd(omega_i, omega_o));
        let cos_h = gdot(normal, h);
        if cos_h.value() > 1e-9 {
            let alpha = (p.roughness * p.roughness).max(R::from_f64(1e-6));
            let weight = ggx_weight(cos_i, cos_o, cos_h, alpha);
            let cos_d = gdot(omega_i, h).max(R::zero()).min(one);
            let m = p.metallic.max(R::zero()).min(one);
            let half = R::from_f64(0.5);
            if (one - m).value() > 0.0 {
                let (rs, rp) = fresnel_rs_rp(cos_d, Cplx::from_re(R::from_f64(DIELECTRIC_IOR)));
                m00 += weight * (one - m) * (rs.norm_sqr() + rp.norm_sqr()) * half;
            }
            if m.value() > 0.0 {
                let (rs, rp) = fresnel_rs_rp(cos_d, p.eta_conductor[band]);
                m00 += weight * m * (rs.norm_sqr() + rp.norm_sqr()) * half;
            }
        }
    }
    m00
}

/// Local-frame intensity evaluation (normal = +z).
pub fn analytic_m00<R: Real>(
    p: &AnalyticParams<R>,
    omega_i: GVec3<R>,
    omega_o: GVec3<R>,
    band: usize,
    opts: AnalyticOpts,
) -> R {
    let z = [R::zero(), R::zero(), R::one()];
    analytic_m00_world(p, z, omega_i, omega_o, band, opts)
}

/// Tabulates the analytic model on a grid. Below-horizon cells are zero.
pub fn tabulate_analytic(
    p: &PBRParams,
    grid: (usize, usize, usize),
    band_centers_nm: Vec<f32>,
    opts: AnalyticOpts,
) -> crate::error::Result<PBRDFTable> {
    let mut t = PBRDFTable::zeroed(grid.0, grid.1, grid.2, band_centers_nm)?;
    let n_lambda = t.n_lambda();
    let nodes: Vec<(usize, usize, usize)> = (0..grid.0)
        .flat_map(|th| (0..grid.1).flat_map(move |td| (0..grid.2).map(move |pd| (th, td, pd))))
        .collect();
    let ap = AnalyticParams::from(p);
    let rows = crate::exec::map_indices(nodes.len(), |i| {
        let (th, td, pd) = nodes[i];
        let mut cells = vec![Mueller::zero(); n_lambda];
        if let Some((wi, wo)) = t.node_directions(th, td, pd) {
            let (s_hat, _, _) = scattering_bases(wi, wo);
            for (l, cell) in cells.iter_mut().enumerate() {
                *cell = analytic_eval_generic(&ap, gvec(wi), gvec(wo), gvec(s_hat), l, opts);
            }
        }
        cells
    });
    for (i, cells) in rows.into_iter().enumerate() {
        let (th, td, pd) = nodes[i];
        for (l, cell) in cells.into_iter().enumerate() {
            *t.cell_mut(th, td, pd, l) = cell;
        }
    }
    Ok(t)
}
