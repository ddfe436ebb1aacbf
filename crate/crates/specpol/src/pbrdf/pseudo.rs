//! Pseudo-measured material set: stands in for measured reflectance tables,
//! which are external. Tables are sampled from the analytic model with
//! randomized parameters plus smooth angular perturbations, built so that
//! every transformation preserves physical validity (positive intensity
//! gains, convex blends toward the ideal depolarizer).

use super::{tabulate_analytic, AnalyticOpts, PBRDFTable, PBRParams, DEFAULT_BAND_CENTERS_NM, DEFAULT_GRID};
use crate::error::Result;
use crate::math::stream_rng;
use rand::Rng;

/// Roughness range of the pseudo-measured materials. The lower bound keeps
/// specular peaks inside the range the arctan compression can represent.
pub const PSEUDO_ROUGHNESS_RANGE: (f64, f64) = (0.35, 1.0);

struct SmoothField {
    amp: [f64; 3],
    freq: [[f64; 3]; 3],
    phase: [f64; 3],
}

impl SmoothField {
    fn sample(rng: &mut impl Rng, max_amp: f64) -> Self {
        let mut amp = [0.0; 3];
        let mut freq = [[0.0; 3]; 3];
        let mut phase = [0.0; 3];
        for k in 0..3 {
            amp[k] = rng.gen_range(0.0..max_amp);
            phase[k] = rng.gen_range(0.0..std::f64::consts::TAU);
            for d in 0..3 {
                freq[k][d] = rng.gen_range(0.5..2.5);
            }
        }
        SmoothField { amp, freq, phase }
    }

    /// Value at normalized grid coordinates u ∈ [0,1]³, bounded by Σ|amp|.
    fn eval(&self, u: [f64; 3]) -> f64 {
        let mut v = 0.0;
        for k in 0..3 {
            let arg = std::f64::consts::TAU
                * (self.freq[k][0] * u[0] + self.freq[k][1] * u[1] + self.freq[k][2] * u[2]);
            v += self.amp[k] * (arg + self.phase[k]).cos();
        }
        v
    }
}

/// Deterministically generates `count` validity-preserving material tables
/// from the seed, paired with the parameters they were grown from.
pub fn generate_pseudo_measured_set(count: usize, seed: u64) -> Result<Vec<(PBRDFTable, PBRParams)>> {
    let indices: Vec<usize> = (0..count).collect();
    let results = crate::exec::map_indices(indices.len(), |i| build_one(seed, i as u64));
    results.into_iter().collect()
}

fn build_one(seed: u64, index: u64) -> Result<(PBRDFTable, PBRParams)> {
    let mut rng = stream_rng(seed ^ 0x70b5_eed0_5e75_u64, index);
    let albedo = [
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.1..0.9),
        rng.gen_range(0.1..0.9),
    ];
    let roughness = rng.gen_range(PSEUDO_ROUGHNESS_RANGE.0..PSEUDO_ROUGHNESS_RANGE.1);
    let metallic = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.1) } else { 1.0 - rng.gen_range(0.0..0.1) };
    let params = PBRParams::new(albedo, roughness, metallic);

    let mut table = tabulate_analytic(
        &params,
        DEFAULT_GRID,
        DEFAULT_BAND_CENTERS_NM.to_vec(),
        AnalyticOpts::default(),
    )?;

    let gain_field = SmoothField::sample(&mut rng, 0.05);
    let depol_field = SmoothField::sample(&mut rng, 0.08);

    let (nh, nd, np) = (table.n_theta_h, table.n_theta_d, table.n_phi_d);
    let n_lambda = table.n_lambda();
    for th in 0..nh {
        for td in 0..nd {
            for pd in 0..np {
                let u = [
                    th as f64 / (nh - 1) as f64,
                    td as f64 / (nd - 1) as f64,
                    pd as f64 / (np - 1) as f64,
                ];
                let gain = (1.0 + gain_field.eval(u)).max(0.2);
                let t_depol = (depol_field.eval(u).abs()).min(0.3);
                for l in 0..n_lambda {
                    let cell = table.cell_mut(th, td, pd, l);
                    let m00 = cell.m[0][0];
                    // convex blend toward the scaled ideal depolarizer keeps
                    // the cell physical; the positive gain preserves it too
                    let mut blended = cell.scale((1.0 - t_depol) * gain);
                    blended.m[0][0] += t_depol * gain * m00;
                    *cell = blended;
                }
            }
        }
    }
    Ok((table, params))
}
