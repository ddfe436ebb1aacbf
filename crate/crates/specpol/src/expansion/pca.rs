//! PCA basis fitting over preprocessed reflectance vectors, via the Gram
//! matrix of the centered samples (sample count ≪ dimension here).

use crate::error::{Error, Result};
use crate::exec;
use nalgebra::DMatrix;

/// Which factorization term a basis belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intensity,
    Polarimetric,
}

impl Term {
    pub fn tag(self) -> &'static str {
        match self {
            Term::Intensity => "int",
            Term::Polarimetric => "pol",
        }
    }
}

/// Default arctan compression scales: the intensity term spans decades,
/// the normalized polarimetric entries are O(1).
pub fn default_alpha(term: Term) -> f64 {
    match term {
        Term::Intensity => 10.0,
        Term::Polarimetric => 1.0,
    }
}

/// Orthonormal PCA basis with the preprocessing constants of its term.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub term: Term,
    pub alpha: f64,
    /// Dataset mean of arctan(α·g), element-wise.
    pub mean: Vec<f64>,
    /// d × p with orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Explained-variance ratio of each retained component.
    pub explained: Vec<f64>,
}

impl PcaBasis {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn components(&self) -> usize {
        self.basis.ncols()
    }

    pub fn cumulative_explained(&self) -> f64 {
        self.explained.iter().sum()
    }
}

/// Fits the top-`p` principal directions of the samples (centered
/// internally; the computed mean is the μ_t of the preprocessing).
/// `alpha` is carried along for the inverse transform.
pub fn pca_fit(samples: &[Vec<f64>], p: usize, term: Term, alpha: f64) -> Result<PcaBasis> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("need at least 2 samples, got {n}")));
    }
    let d = samples[0].len();
    for (i, s) in samples.iter().enumerate() {
        if s.len() != d {
            return Err(Error::shape(format!("{d} elements"), format!("{} in sample {i}", s.len())));
        }
    }
    if p == 0 || p > n - 1 || p > d {
        return Err(Error::Config(format!("p = {p} must satisfy 1 ≤ p ≤ min(count−1, d) = {}", (n - 1).min(d))));
    }

    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let centered: Vec<Vec<f64>> = exec::map_indices(n, |i| {
        samples[i].iter().zip(&mean).map(|(v, m)| v - m).collect()
    });

    // Gram matrix of the centered rows; each entry is one sequential dot so
    // results do not depend on the thread count
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let dots = exec::map_indices(pairs.len(), |k| {
        let (i, j) = pairs[k];
        centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        gram[(i, j)] = dots[k];
        gram[(j, i)] = dots[k];
    }

    let eig = nalgebra::SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    if total <= 1e-24 {
        return Err(Error::Degenerate("samples are identical; centered matrix has rank 0".into()));
    }

    let mut basis = DMatrix::<f64>::zeros(d, p);
    let mut explained = Vec::with_capacity(p);
    for (col, &oi) in order.iter().take(p).enumerate() {
        let lam = eig.eigenvalues[oi].max(0.0);
        let sigma = lam.sqrt();
        if sigma <= 1e-12 * eig.eigenvalues[order[0]].max(0.0).sqrt() {
            return Err(Error::Degenerate(format!(
                "rank deficiency: only {col} nonzero singular values for p = {p}"
            )));
        }
        // right singular vector: v = Xᵀ u / σ
        let u = eig.eigenvectors.column(oi);
        let mut v = vec![0.0; d];
        for (i, row) in centered.iter().enumerate() {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for (vk, &x) in v.iter_mut().zip(row) {
                *vk += ui * x;
            }
        }
        let inv_sigma = 1.0 / sigma;
        for vk in v.iter_mut() {
            *vk *= inv_sigma;
        }
        // deterministic sign: largest-magnitude component positive
        let mut arg_max = 0;
        for (i, vk) in v.iter().enumerate() {
            if vk.abs() > v[arg_max].abs() {
                arg_max = i;
            }
        }
        if v[arg_max] < 0.0 {
            for vk in v.iter_mut() {
                *vk = -*vk;
            }
        }
        for (i, &vk) in v.iter().enumerate() {
            basis[(i, col)] = vk;
        }
        explained.push(lam / total);
    }

    Ok(PcaBasis { term, alpha, mean, basis, explained })
}

/// Projects a centered (preprocessed) vector onto the basis: w = Uᵀ g′.
pub fn pca_project(basis: &PcaBasis, g_prime: &[f64]) -> Result<Vec<f64>> {
    if g_prime.len() != basis.dim() {
        return Err(Error::shape(format!("{} elements", basis.dim()), format!("{}", g_prime.len())));
    }
    let p = basis.components();
    let mut w = vec![0.0; p];
    for (k, wk) in w.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..basis.dim() {
            acc += basis.basis[(i, k)] * g_prime[i];
        }
        *wk = acc;
    }
    Ok(w)
}

/// Reconstructs the centered representation: ĝ′ = U w.
pub fn pca_reconstruct(basis: &PcaBasis, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != basis.components() {
        return Err(Error::shape(format!("{} weights", basis.components()), format!("{}", w.len())));
    }
    let mut g = vec![0.0; basis.dim()];
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        for (i, gi) in g.iter_mut().enumerate() {
            *gi += basis.basis[(i, k)] * wk;
        }
    }
    Ok(g)
}
