//! Material dataset expansion: arctan preprocessing, PCA compression of the
//! factorized intensity/polarimetric terms, the conditional weight
//! generator, and the end-to-end synthesis loop with per-cell validity
//! filtering.
//!
//! Wavelengths are flattened: each (material, band) pair is one PCA and
//! generator sample, conditioned on the material's full parameter tuple.

mod cvae;
mod pca;

pub use cvae::{
    cvae_sample, cvae_train, Condition, TraceEntry, TrainConfig, TrainReport, WeightGenerator,
    WeightVector,
};
pub use pca::{default_alpha, pca_fit, pca_project, pca_reconstruct, PcaBasis, Term};

use crate::error::{Error, Result};
use crate::math::stream_rng;
use crate::pbrdf::{factorize, PBRDFTable, PBRParams, FACTORIZE_M00_FLOOR};
use crate::polarimetry::Mueller;
use crate::validity::certify_cells;
use rand::Rng;

/// Margin kept between reconstructed arctan values and the ±π/2 asymptote.
pub const INVERSE_MARGIN: f64 = 1e-6;

/// Nonlinear compression and mean-centering: arctan(α·g) − μ, element-wise.
pub fn preprocess(g: &[f64], alpha: f64, mu: &[f64]) -> Result<Vec<f64>> {
    if alpha <= 0.0 {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if g.len() != mu.len() {
        return Err(Error::shape(format!("{} mean elements", g.len()), format!("{}", mu.len())));
    }
    Ok(g.iter().zip(mu).map(|(&v, &m)| (alpha * v).atan() - m).collect())
}

/// Inverse of [`preprocess`]: tan(g′ + μ)/α. Arguments outside
/// (−π/2 + margin, π/2 − margin) are clamped; the flag reports whether any
/// clamp fired.
pub fn inverse_preprocess(g_prime: &[f64], alpha: f64, mu: &[f64]) -> Result<(Vec<f64>, bool)> {
    if alpha <= 0.0 {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    if g_prime.len() != mu.len() {
        return Err(Error::shape(format!("{} mean elements", g_prime.len()), format!("{}", mu.len())));
    }
    let lim = std::f64::consts::FRAC_PI_2 - INVERSE_MARGIN;
    let mut clamped = false;
    let out = g_prime
        .iter()
        .zip(mu)
        .map(|(&v, &m)| {
            let mut arg = v + m;
            if arg > lim {
                arg = lim;
                clamped = true;
            } else if arg < -lim {
                arg = -lim;
                clamped = true;
            }
            arg.tan() / alpha
        })
        .collect();
    Ok((out, clamped))
}

/// Per-band flattened term vectors of a factorized table: for each band,
/// the intensity vector over angular cells and the 16-entry-per-cell
/// polarimetric vector.
pub fn term_vectors(table: &PBRDFTable) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let f = factorize(table);
    let nl = table.n_lambda();
    let angular = table.angular_cells();
    let mut ints = vec![Vec::with_capacity(angular); nl];
    let mut pols = vec![Vec::with_capacity(angular * 16); nl];
    for cell in 0..angular {
        for l in 0..nl {
            let idx = cell * nl + l;
            ints[l].push(f.intensity[idx]);
            for i in 0..4 {
                for j in 0..4 {
                    pols[l].push(f.pol[idx].m[i][j]);
                }
            }
        }
    }
    (ints, pols)
}

/// Bases, generator, and grid metadata needed to synthesize new materials.
#[derive(Debug, Clone)]
pub struct ExpansionModel {
    pub basis_int: PcaBasis,
    pub basis_pol: PcaBasis,
    pub generator: WeightGenerator,
    pub grid: (usize, usize, usize),
    pub band_centers_nm: Vec<f32>,
}

/// Training corpus assembled from a material set: PCA bases for both terms
/// plus per-(material, band) weight/condition pairs.
pub fn build_training_corpus(
    set: &[(PBRDFTable, PBRParams)],
    p: usize,
) -> Result<(PcaBasis, PcaBasis, Vec<WeightVector>, Vec<Condition>)> {
    if set.is_empty() {
        return Err(Error::Config("empty material set".into()));
    }
    let alpha_int = default_alpha(Term::Intensity);
    let alpha_pol = default_alpha(Term::Polarimetric);

    let mut samples_int = Vec::new();
    let mut samples_pol = Vec::new();
    let mut conditions = Vec::new();
    for (table, params) in set {
        let (ints, pols) = term_vectors(table);
        for (int_vec, pol_vec) in ints.into_iter().zip(pols) {
            samples_int.push(int_vec.iter().map(|&v| (alpha_int * v).atan()).collect::<Vec<_>>());
            samples_pol.push(pol_vec.iter().map(|&v| (alpha_pol * v).atan()).collect::<Vec<_>>());
            conditions.push(Condition::from(params));
        }
    }

    let basis_int = pca_fit(&samples_int, p, Term::Intensity, alpha_int)?;
    let basis_pol = pca_fit(&samples_pol, p, Term::Polarimetric, alpha_pol)?;

    let mut weights = Vec::with_capacity(samples_int.len());
    for (si, sp) in samples_int.iter().zip(&samples_pol) {
        let centered_i: Vec<f64> = si.iter().zip(&basis_int.mean).map(|(v, m)| v - m).collect();
        let centered_p: Vec<f64> = sp.iter().zip(&basis_pol.mean).map(|(v, m)| v - m).collect();
        weights.push(WeightVector {
            int: pca_project(&basis_int, &centered_i)?,
            pol: pca_project(&basis_pol, &centered_p)?,
        });
    }
    Ok((basis_int, basis_pol, weights, conditions))
}

/// Condition sampling for expansion: uniform albedo and roughness, metals
/// and dielectrics equally likely with a small jitter toward the interior.
pub fn sample_condition(rng: &mut impl Rng) -> Condition {
    Condition {
        albedo: [
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
            rng.gen_range(0.05..0.95),
        ],
        roughness: rng.gen_range(0.05..1.0),
        metallic: if rng.gen_bool(0.5) {
            rng.gen_range(0.0..0.1)
        } else {
            1.0 - rng.gen_range(0.0..0.1)
        },
    }
}

/// Reject a candidate when more than this fraction of reconstructed
/// entries had to be clamped away from the arctan asymptote.
pub const MAX_CLAMPED_FRACTION: f64 = 0.005;

/// Outcome of one candidate synthesis.
#[derive(Debug)]
pub struct Candidate {
    pub table: PBRDFTable,
    pub params: PBRParams,
    pub accepted: bool,
    pub repaired_cells: usize,
}

/// Synthesizes one candidate material from its index (fully deterministic).
pub fn synthesize_candidate(model: &ExpansionModel, seed: u64, index: u64) -> Result<Candidate> {
    let mut rng = stream_rng(seed ^ 0x9e3779b97f4a7c15, index);
    let condition = sample_condition(&mut rng);
    let (nh, nd, np) = model.grid;
    let nl = model.band_centers_nm.len();
    let angular = nh * nd * np;

    let mut cells = vec![Mueller::zero(); angular * nl];
    let mut clamped_entries = 0usize;
    let mut total_entries = 0usize;
    for l in 0..nl {
        let sample_seed = seed
            .wrapping_mul(0x100000001b3)
            .wrapping_add(index)
            .wrapping_mul(16)
            .wrapping_add(l as u64);
        let w = model.generator.sample(&condition, sample_seed);

        let g_int_c = pca_reconstruct(&model.basis_int, &w.int)?;
        let (m00, clamped_i) = inverse_preprocess(&g_int_c, model.basis_int.alpha, &model.basis_int.mean)?;
        let g_pol_c = pca_reconstruct(&model.basis_pol, &w.pol)?;
        let (pol, clamped_p) = inverse_preprocess(&g_pol_c, model.basis_pol.alpha, &model.basis_pol.mean)?;
        if clamped_i || clamped_p {
            // count precisely for the rejection policy
            let lim = std::f64::consts::FRAC_PI_2 - INVERSE_MARGIN;
            clamped_entries += g_int_c
                .iter()
                .zip(&model.basis_int.mean)
                .filter(|(v, m)| (**v + **m).abs() > lim)
                .count();
            clamped_entries += g_pol_c
                .iter()
                .zip(&model.basis_pol.mean)
                .filter(|(v, m)| (**v + **m).abs() > lim)
                .count();
        }
        total_entries += g_int_c.len() + g_pol_c.len();

        for cell in 0..angular {
            let m00_cell = m00[cell].max(0.0);
            let mut m = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = m00_cell * pol[cell * 16 + i * 4 + j];
                }
            }
            cells[cell * nl + l] = Mueller::from_rows(m);
        }
    }

    let masked: Vec<bool> = cells.iter().map(|c| c.m[0][0] <= FACTORIZE_M00_FLOOR).collect();
    let cert = certify_cells(&mut cells, &masked)?;
    let clamped_fraction = clamped_entries as f64 / total_entries.max(1) as f64;
    let accepted = !cert.rejected && clamped_fraction <= MAX_CLAMPED_FRACTION;

    let table = PBRDFTable::from_cells(nh, nd, np, model.band_centers_nm.clone(), cells)?;
    let params = PBRParams::new(condition.albedo, condition.roughness, condition.metallic);
    Ok(Candidate { table, params, accepted, repaired_cells: cert.repaired_cells })
}

/// Expands the model into `count` accepted materials, paired with their
/// conditioning parameters as labels. Candidates are examined in index
/// order with per-candidate seeds, so the accepted set is identical across
/// runs and thread counts. Aborts when fewer than 1% of a 1000-candidate
/// window get accepted.
pub fn expand_dataset(model: &ExpansionModel, count: usize, seed: u64) -> Result<Vec<(PBRDFTable, PBRParams)>> {
    let mut accepted = Vec::with_capacity(count);
    let mut next_index = 0u64;
    let mut window_attempts = 0usize;
    let mut window_accepted = 0usize;
    while accepted.len() < count {
        let want = count - accepted.len();
        let chunk = (want * 2).clamp(8, 256);
        let results = crate::exec::map_indices(chunk, |k| {
            synthesize_candidate(model, seed, next_index + k as u64)
        });
        for r in results {
            let c = r?;
            window_attempts += 1;
            if c.accepted {
                window_accepted += 1;
                if accepted.len() < count {
                    accepted.push((c.table, c.params));
                }
            }
            if window_attempts >= 1000 {
                if (window_accepted as f64) < 0.01 * window_attempts as f64 {
                    return Err(Error::Degenerate(format!(
                        "expansion acceptance rate {}/{} over the last window; generator or bases unusable",
                        window_accepted, window_attempts
                    )));
                }
                window_attempts = 0;
                window_accepted = 0;
            }
        }
        next_index += chunk as u64;
    }
    accepted.truncate(count);
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preprocess_examples() {
        let mu = vec![0.0; 3];
        let out = preprocess(&[0.0, 1.0, -1.0], 1.0, &mu).unwrap();
        assert_relative_eq!(out[0], 0.0);
        assert_relative_eq!(out[1], std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(out[2], -std::f64::consts::FRAC_PI_4);
        assert!(preprocess(&[1.0], 1.0, &[0.0, 0.0]).is_err());
        assert!(preprocess(&[1.0], 0.0, &[0.0]).is_err());
    }

    #[test]
    fn inverse_examples_and_clamp() {
        let mu = vec![0.0];
        let (out, clamped) = inverse_preprocess(&[0.0], 1.0, &mu).unwrap();
        assert_relative_eq!(out[0], 0.0);
        assert!(!clamped);
        let (out, clamped) = inverse_preprocess(&[std::f64::consts::FRAC_PI_4], 1.0, &mu).unwrap();
        assert_relative_eq!(out[0], 1.0, epsilon = 1e-12);
        assert!(!clamped);
        let near = std::f64::consts::FRAC_PI_2 - 1e-7;
        let (out, clamped) = inverse_preprocess(&[near], 1.0, &mu).unwrap();
        assert!(clamped, "inputs past the margin must be flagged");
        let lim = std::f64::consts::FRAC_PI_2 - INVERSE_MARGIN;
        assert_relative_eq!(out[0], lim.tan(), epsilon = 1e-6 * lim.tan());
    }

    #[test]
    fn round_trip_inside_operating_range() {
        let mu: Vec<f64> = (0..64).map(|i| (i as f64 * 0.1).sin() * 0.2).collect();
        let g: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos() * 1.4).collect();
        let alpha = 10.0;
        let fwd = preprocess(&g, alpha, &mu).unwrap();
        let (back, clamped) = inverse_preprocess(&fwd, alpha, &mu).unwrap();
        assert!(!clamped);
        for (a, b) in g.iter().zip(&back) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn condition_sampling_ranges() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..500 {
            let c = sample_condition(&mut rng);
            for k in c.albedo {
                assert!((0.05..0.95).contains(&k));
            }
            assert!(c.roughness >= 0.05 && c.roughness <= 1.0);
            assert!((0.0..=1.0).contains(&c.metallic));
            assert!(c.metallic <= 0.1 || c.metallic >= 0.9, "metallic stays near the endpoints");
        }
    }
}
