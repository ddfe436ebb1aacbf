//! Nonlinear least-squares fit of the analytic intensity term against a
//! table's m00 over a fixed angle/band sample set. The polarimetric
//! structure does not enter the fit.

use super::{analytic::AnalyticParams, analytic_m00, AnalyticOpts, PBRDFTable, PBRParams};
use crate::error::{Error, Result};
use crate::math::{gvec, Dual, Real, Vec3};
use crate::optim::{solve_lm, LmOptions};
use nalgebra::DMatrix;

/// Fit result with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: PBRParams,
    /// RMS of the log-intensity residuals at the solution.
    pub residual_rms: f64,
    pub converged: bool,
    /// Per-parameter low-sensitivity flags in (k_r, k_g, k_b, r, m) order;
    /// flagged parameters moved the residuals too little to be trusted.
    pub low_sensitivity: [bool; 5],
}

const LOG_FLOOR: f64 = 1e-7;

fn sample_nodes(t: &PBRDFTable) -> Vec<(Vec3, Vec3, usize, f64)> {
    // every (θ_h, θ_d) pair at three φ_d stations, all bands
    let pd_stations = [0, (t.n_phi_d - 1) / 2, t.n_phi_d - 1];
    let mut out = Vec::new();
    for th in 0..t.n_theta_h {
        for td in 0..t.n_theta_d {
            for &pd in &pd_stations {
                if let Some((wi, wo)) = t.node_directions(th, td, pd) {
                    for l in 0..t.n_lambda() {
                        let target = t.cell(th, td, pd, l).m[0][0];
                        if target > super::FACTORIZE_M00_FLOOR {
                            out.push((wi, wo, l, (target.max(LOG_FLOOR)).ln()));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Fits (k, r, m) to a table's intensity term by damped least squares on
/// log-m00 residuals, from a small deterministic multi-start. Returns the
/// best minimizer; `converged = false` means the iteration budget ran out
/// and the result is best-so-far.
pub fn fit_pbr_params(t: &PBRDFTable) -> Result<FitOutcome> {
    if t.n_lambda() > 3 {
        return Err(Error::Config("intensity fit expects at most 3 bands".into()));
    }
    let nodes = sample_nodes(t);
    if nodes.len() < 16 {
        return Err(Error::Degenerate("too few usable cells to separate lobes".into()));
    }

    let eval = |x: &[f64], mut jac: Option<&mut DMatrix<f64>>| {
        let p = AnalyticParams::<Dual<5>>::new(
            [Dual::variable(x[0], 0), Dual::variable(x[1], 1), Dual::variable(x[2], 2)],
            Dual::variable(x[3], 3),
            Dual::variable(x[4], 4),
        );
        let mut r = nalgebra::DVector::zeros(nodes.len());
        for (i, (wi, wo, band, log_target)) in nodes.iter().enumerate() {
            let m00 = analytic_m00(&p, gvec(*wi), gvec(*wo), *band, AnalyticOpts::default());
            let logm = m00.max(Dual::constant(LOG_FLOOR)).ln();
            r[i] = logm.v - log_target;
            if let Some(j) = jac.as_deref_mut() {
                for k in 0..5 {
                    j[(i, k)] = logm.d[k];
                }
            }
        }
        r
    };
    let project = |x: &mut [f64]| {
        for k in x.iter_mut().take(3) {
            *k = k.clamp(0.0, 1.0);
        }
        x[3] = x[3].clamp(0.02, 1.0);
        x[4] = x[4].clamp(0.0, 1.0);
    };

    // deterministic multi-start over the roughness/metallic quadrants,
    // high-roughness start first so it wins insensitivity ties
    let starts = [
        [0.5, 0.5, 0.5, 0.9, 0.1],
        [0.5, 0.5, 0.5, 0.2, 0.1],
        [0.5, 0.5, 0.5, 0.9, 0.9],
        [0.5, 0.5, 0.5, 0.2, 0.9],
    ];
    let opts = LmOptions { max_iterations: 80, ..Default::default() };
    let mut best: Option<crate::optim::LmResult> = None;
    for s in starts {
        let res = solve_lm(&s, eval, project, &opts);
        if best.as_ref().map_or(true, |b| res.cost < b.cost - 1e-12 * b.cost.abs()) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");

    let max_diag = best.jtj_diagonal.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    let mut low_sensitivity = [false; 5];
    for (k, flag) in low_sensitivity.iter_mut().enumerate() {
        *flag = best.jtj_diagonal[k] < 1e-8 * max_diag;
    }

    Ok(FitOutcome {
        params: PBRParams::new(
            [best.params[0], best.params[1], best.params[2]],
            best.params[3],
            best.params[4],
        ),
        residual_rms: (2.0 * best.cost / nodes.len() as f64).sqrt(),
        converged: best.converged,
        low_sensitivity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbrdf::{tabulate_analytic, DEFAULT_BAND_CENTERS_NM};

    fn small_grid() -> (usize, usize, usize) {
        (16, 8, 8)
    }

    #[test]
    fn recovers_dielectric_parameters() {
        let truth = PBRParams::new([0.5, 0.2, 0.1], 0.3, 0.0);
        let t = tabulate_analytic(&truth, small_grid(), DEFAULT_BAND_CENTERS_NM.to_vec(), AnalyticOpts::default())
            .unwrap();
        let fit = fit_pbr_params(&t).unwrap();
        for c in 0..3 {
            assert!(
                (fit.params.albedo[c] - truth.albedo[c]).abs() < 0.02,
                "albedo[{c}]: {} vs {}", fit.params.albedo[c], truth.albedo[c]
            );
        }
        assert!((fit.params.roughness - truth.roughness).abs() < 0.05, "roughness {}", fit.params.roughness);
        assert!((fit.params.metallic - truth.metallic).abs() < 0.05, "metallic {}", fit.params.metallic);
    }

    #[test]
    fn recovers_metal_parameters() {
        let truth = PBRParams::new([0.8, 0.6, 0.3], 0.45, 1.0);
        let t = tabulate_analytic(&truth, small_grid(), DEFAULT_BAND_CENTERS_NM.to_vec(), AnalyticOpts::default())
            .unwrap();
        let fit = fit_pbr_params(&t).unwrap();
        assert!((fit.params.metallic - 1.0).abs() < 0.05, "metallic {}", fit.params.metallic);
        assert!((fit.params.roughness - 0.45).abs() < 0.05, "roughness {}", fit.params.roughness);
    }

    #[test]
    fn pure_diffuse_table_flags_roughness() {
        // no specular lobe at all: metallic must go to ~0 and roughness is
        // unidentifiable, staying in the high-roughness start region
        let truth = PBRParams::new([0.6, 0.6, 0.6], 0.5, 0.0);
        let opts = AnalyticOpts { specular: false, ..Default::default() };
        let t = tabulate_analytic(&truth, small_grid(), DEFAULT_BAND_CENTERS_NM.to_vec(), opts).unwrap();
        let fit = fit_pbr_params(&t).unwrap();
        assert!(fit.params.metallic < 0.05, "metallic {}", fit.params.metallic);
        assert!(fit.params.roughness >= 0.7, "roughness should stay in the insensitive start region");
        assert!(fit.low_sensitivity[3], "roughness must be flagged low-sensitivity");
    }

    #[test]
    fn albedo_scales_with_table_intensity() {
        let truth = PBRParams::new([0.2, 0.15, 0.1], 0.5, 0.0);
        let t = tabulate_analytic(&truth, small_grid(), DEFAULT_BAND_CENTERS_NM.to_vec(), AnalyticOpts::default())
            .unwrap();
        let mut doubled = t.clone();
        for c in doubled.cells_mut() {
            *c = c.scale(2.0);
        }
        let a = fit_pbr_params(&t).unwrap();
        let b = fit_pbr_params(&doubled).unwrap();
        for c in 0..3 {
            let ratio = b.params.albedo[c] / a.params.albedo[c];
            assert!((ratio - 2.0).abs() < 0.15, "channel {c} ratio {ratio}");
        }
    }
}
