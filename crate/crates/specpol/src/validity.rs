//! Physical-realizability certification and repair of Mueller matrices.
//!
//! A Mueller matrix is an ensemble of Jones interactions iff its Pauli-basis
//! coherency matrix is positive semidefinite; [`cloude_filter`] projects to
//! that set by clamping negative coherency eigenvalues. The weaker Stokes
//! criterion (maps physical states to physical states) is tested two ways:
//! analytically by [`givens_kostinski_check`] and by the brute-force
//! [`sampling_oracle`] referee.

use crate::error::Result;
use crate::math::stream_rng;
use crate::polarimetry::{mat2_mul, pauli, Mueller, Stokes};
use nalgebra::Matrix4;
use rand::Rng;
use std::sync::OnceLock;

/// 4×4 complex Hermitian coherency matrix stored as real and imaginary
/// parts (re symmetric, im antisymmetric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherencyMatrix {
    pub re: [[f64; 4]; 4],
    pub im: [[f64; 4]; 4],
}

impl CoherencyMatrix {
    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.re[i][i]).sum()
    }

    fn from_params(t: &[f64; 16]) -> Self {
        let mut re = [[0.0; 4]; 4];
        let mut im = [[0.0; 4]; 4];
        let mut k = 0;
        for i in 0..4 {
            re[i][i] = t[k];
            k += 1;
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                re[i][j] = t[k];
                re[j][i] = t[k];
                im[i][j] = t[k + 1];
                im[j][i] = -t[k + 1];
                k += 2;
            }
        }
        CoherencyMatrix { re, im }
    }

}

/// Mueller matrix of a coherency matrix: M_ij = ½ tr(σ_i Σ_kl T_kl σ_k · σ_l).
/// Exact linear bijection with [`to_coherency`].
pub fn mueller_from_coherency(t: &CoherencyMatrix) -> Mueller {
    // M_ij = ½ Σ_kl T_kl tr(σ_i σ_k σ_j σ_l)
    let mut m = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for k in 0..4 {
                for l in 0..4 {
                    let tr = PAULI_TRACES.get_or_init(pauli_traces)[((i * 4 + k) * 4 + j) * 4 + l];
                    // T_kl = re + i·im; trace coefficient tr = (re, im);
                    // take the real part of T_kl · tr
                    acc += t.re[k][l] * tr.0 - t.im[k][l] * tr.1;
                }
            }
            m[i][j] = 0.5 * acc;
        }
    }
    Mueller::from_rows(m)
}

static PAULI_TRACES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
static COHERENCY_MAP_INV: OnceLock<[[f64; 16]; 16]> = OnceLock::new();

fn pauli_traces() -> Vec<(f64, f64)> {
    let mut out = vec![(0.0, 0.0); 256];
    for i in 0..4 {
        for k in 0..4 {
            for j in 0..4 {
                for l in 0..4 {
                    let p = mat2_mul(
                        mat2_mul(pauli::<f64>(i), pauli::<f64>(k)),
                        mat2_mul(pauli::<f64>(j), pauli::<f64>(l)),
                    );
                    let tr = p[0][0] + p[1][1];
                    out[((i * 4 + k) * 4 + j) * 4 + l] = (tr.re, tr.im);
                }
            }
        }
    }
    out
}

fn coherency_map_inverse() -> [[f64; 16]; 16] {
    // forward map columns: Mueller entries of each Hermitian basis element
    let mut fwd = nalgebra::DMatrix::<f64>::zeros(16, 16);
    for k in 0..16 {
        let mut t = [0.0; 16];
        t[k] = 1.0;
        let m = mueller_from_coherency(&CoherencyMatrix::from_params(&t));
        for i in 0..4 {
            for j in 0..4 {
                fwd[(i * 4 + j, k)] = m.m[i][j];
            }
        }
    }
    let inv = fwd.try_inverse().expect("coherency map is a bijection");
    let mut out = [[0.0; 16]; 16];
    for r in 0..16 {
        for c in 0..16 {
            out[r][c] = inv[(r, c)];
        }
    }
    out
}

/// Pauli-basis coherency matrix of a Mueller matrix. The identity Mueller
/// matrix maps to diag(1,0,0,0); the ideal depolarizer diag(1,0,0,0) maps
/// to ¼·I.
pub fn to_coherency(m: &Mueller) -> CoherencyMatrix {
    let inv = COHERENCY_MAP_INV.get_or_init(coherency_map_inverse);
    let mut vec_m = [0.0; 16];
    for i in 0..4 {
        for j in 0..4 {
            vec_m[i * 4 + j] = m.m[i][j];
        }
    }
    let mut t = [0.0; 16];
    for (r, t_r) in t.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in 0..16 {
            acc += inv[r][c] * vec_m[c];
        }
        *t_r = acc;
    }
    CoherencyMatrix::from_params(&t)
}

/// Eigendecomposition of a 4×4 complex Hermitian matrix by cyclic Jacobi
/// sweeps on its canonical 8×8 real-symmetric image. Deterministic sweep
/// order, off-diagonal threshold 1e−13 relative to the matrix norm.
/// Returns eigenvalues (8, in duplicated pairs) and the rotation matrix.
fn jacobi8(h: &CoherencyMatrix) -> ([f64; 8], [[f64; 8]; 8]) {
    let mut a = [[0.0f64; 8]; 8];
    for i in 0..4 {
        for j in 0..4 {
            a[i][j] = h.re[i][j];
            a[i][j + 4] = -h.im[i][j];
            a[i + 4][j] = h.im[i][j];
            a[i + 4][j + 4] = h.re[i][j];
        }
    }
    let mut v = [[0.0f64; 8]; 8];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let threshold = 1e-13 * scale;

    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..8 {
            for q in (p + 1)..8 {
                off += a[p][q] * a[p][q];
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            break;
        }
        for p in 0..8 {
            for q in (p + 1)..8 {
                let apq = a[p][q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..8 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..8 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut eig = [0.0; 8];
    for i in 0..8 {
        eig[i] = a[i][i];
    }
    (eig, v)
}

/// Minimum and maximum coherency eigenvalues.
pub fn coherency_eigen_bounds(h: &CoherencyMatrix) -> (f64, f64) {
    let (eig, _) = jacobi8(h);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Projects a Mueller matrix to physical realizability: eigen-decomposes the
/// coherency matrix, clamps negative eigenvalues to zero and reconstructs.
/// `repaired` is true iff any eigenvalue fell below −1e−9 × the largest
/// eigenvalue; unrepaired inputs are returned unchanged.
pub fn cloude_filter(m: &Mueller) -> (Mueller, bool) {
    let h = to_coherency(m);
    let (eig, v) = jacobi8(&h);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min >= -1e-9 * max.max(1e-300) {
        return (*m, false);
    }
    // reconstruct V·diag(λ₊)·Vᵀ in the 8×8 image, then read back
    let mut p = [[0.0f64; 8]; 8];
    for k in 0..8 {
        let lam = eig[k].max(0.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..8 {
            let vik = v[i][k];
            if vik == 0.0 {
                continue;
            }
            for j in 0..8 {
                p[i][j] += lam * vik * v[j][k];
            }
        }
    }
    let mut re = [[0.0; 4]; 4];
    let mut im = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            re[i][j] = 0.5 * (p[i][j] + p[i + 4][j + 4]);
            im[i][j] = 0.5 * (p[i + 4][j] - p[i][j + 4]);
        }
    }
    // enforce hermitian symmetry against roundoff
    let mut h2 = CoherencyMatrix { re: [[0.0; 4]; 4], im: [[0.0; 4]; 4] };
    for i in 0..4 {
        for j in 0..4 {
            h2.re[i][j] = 0.5 * (re[i][j] + re[j][i]);
            h2.im[i][j] = 0.5 * (im[i][j] - im[j][i]);
        }
    }
    (mueller_from_coherency(&h2), true)
}

/// Relative tolerance for the Givens–Kostinski realness and eigenvector
/// physicality tests; matrices inside the band count as valid.
pub const GK_REL_TOL: f64 = 1e-9;

/// Stokes-criterion test: computes the eigenvalues of G·Mᵀ·G·M with
/// G = diag(1,−1,−1,−1) and accepts iff they are all real and the dominant
/// eigenvalue owns a physical Stokes eigenvector. Cheap boundary conditions
/// (m00 ≥ 0, first row/column inside the light cone) are checked first.
pub fn givens_kostinski_check(m: &Mueller) -> bool {
    let m00 = m.m[0][0];
    let scale = m.max_abs_entry();
    if scale == 0.0 {
        return true; // zero map annihilates every state
    }
    let tol = GK_REL_TOL * scale;
    if m00 < -tol {
        return false;
    }
    // necessary conditions from probing the cone boundary: the first row
    // (response to the polarized part) and first column (image of
    // unpolarized light) must stay inside the light cone
    let row = (m.m[0][1] * m.m[0][1] + m.m[0][2] * m.m[0][2] + m.m[0][3] * m.m[0][3]).sqrt();
    let col = (m.m[1][0] * m.m[1][0] + m.m[2][0] * m.m[2][0] + m.m[3][0] * m.m[3][0]).sqrt();
    if row > m00 + tol || col > m00 + tol {
        return false;
    }

    let g = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, -1.0, -1.0));
    let mm = Matrix4::from_fn(|i, j| m.m[i][j]);
    let a = g * mm.transpose() * g * mm;

    let eig = a.complex_eigenvalues();
    let radius = eig.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if radius <= 1e-300 {
        // G·Mᵀ·G·M vanishes; boundary conditions above already screened the
        // first row/column, accept
        return true;
    }
    if eig.iter().any(|z| z.im.abs() > GK_REL_TOL * radius) {
        return false;
    }
    let lam_dom = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);

    // dominant eigenspace = null space of (A − λ_dom I)
    let shifted = a - Matrix4::identity() * lam_dom;
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let rank_tol = 1e-7 * radius;
    let mut basis: Vec<nalgebra::Vector4<f64>> = Vec::new();
    for (i, sv) in svd.singular_values.iter().enumerate() {
        if *sv <= rank_tol {
            basis.push(v_t.row(i).transpose());
        }
    }
    if basis.is_empty() {
        // numerically defective dominant eigenvalue; fall back to the
        // smallest singular direction
        let mut idx = 0;
        for (i, sv) in svd.singular_values.iter().enumerate() {
            if *sv < svd.singular_values[idx] {
                idx = i;
            }
        }
        basis.push(v_t.row(idx).transpose());
    }

    if basis.len() == 1 {
        let mut v = basis[0];
        if v[0] < 0.0 {
            v = -v;
        }
        let spatial = (v[1] * v[1] + v[2] * v[2] + v[3] * v[3]).sqrt();
        v[0] > 0.0 && spatial <= v[0] * (1.0 + GK_REL_TOL)
    } else {
        // degenerate dominant eigenvalue: physical iff the eigenspace
        // contains a time-like direction, i.e. max of vᵀGv over the span
        // is nonnegative
        let d = basis.len();
        let mut q = nalgebra::DMatrix::<f64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                q[(i, j)] = (basis[i].transpose() * g * basis[j])[(0, 0)];
            }
        }
        let eigq = q.symmetric_eigenvalues();
        eigq.iter().cloned().fold(f64::NEG_INFINITY, f64::max) >= -GK_REL_TOL
    }
}

/// Brute-force Stokes-criterion referee: true iff `m` maps `n` sampled
/// physical states (alternating fully and partially polarized) to physical
/// states within a 1e−9·s0 tolerance.
pub fn sampling_oracle(m: &Mueller, n: usize, seed: u64) -> bool {
    let mut rng = stream_rng(seed, 0x5a11);
    for k in 0..n {
        let dop = if k % 2 == 0 { 1.0 } else { rng.gen_range(0.0..1.0) };
        // uniform direction on the Poincaré sphere
        let z: f64 = rng.gen_range(-1.0..1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (1.0 - z * z).sqrt();
        let s = Stokes::new(1.0, dop * r * phi.cos(), dop * r * phi.sin(), dop * z);
        if !m.apply(s).is_physical(1e-9) {
            return false;
        }
    }
    true
}

/// Reject a reconstructed material if more than this fraction of unmasked
/// cells needed a repair larger than [`CELL_REPAIR_REL_FROBENIUS`].
pub const MAX_REPAIRED_CELL_FRACTION: f64 = 0.01;
/// Relative Frobenius change above which a repaired cell counts against
/// the rejection budget.
pub const CELL_REPAIR_REL_FROBENIUS: f64 = 0.05;

/// Certification summary over a set of per-cell Mueller matrices.
#[derive(Debug, Clone, Default)]
pub struct CellCertification {
    pub cells_checked: usize,
    pub cells_masked: usize,
    pub repaired_cells: usize,
    pub heavily_repaired_cells: usize,
    pub max_rel_frobenius_repair: f64,
    pub rejected: bool,
}

/// Cloude-filters every unmasked cell in place and applies the whole-sample
/// rejection policy: reject when more than 1% of unmasked cells moved more
/// than 5% in relative Frobenius norm.
pub fn certify_cells(cells: &mut [Mueller], masked: &[bool]) -> Result<CellCertification> {
    if cells.len() != masked.len() {
        return Err(crate::error::Error::shape(
            format!("{} mask entries", cells.len()),
            format!("{}", masked.len()),
        ));
    }
    let filtered = crate::exec::map_indices(cells.len(), |i| {
        if masked[i] {
            None
        } else {
            let (out, repaired) = cloude_filter(&cells[i]);
            Some((out, repaired))
        }
    });
    let mut cert = CellCertification::default();
    cert.cells_checked = cells.len();
    for (i, f) in filtered.into_iter().enumerate() {
        match f {
            None => cert.cells_masked += 1,
            Some((out, repaired)) => {
                if repaired {
                    cert.repaired_cells += 1;
                    let base = cells[i].frobenius().max(1e-300);
                    let rel = cells[i].frobenius_distance(&out) / base;
                    cert.max_rel_frobenius_repair = cert.max_rel_frobenius_repair.max(rel);
                    if rel > CELL_REPAIR_REL_FROBENIUS {
                        cert.heavily_repaired_cells += 1;
                    }
                    cells[i] = out;
                }
            }
        }
    }
    let unmasked = cert.cells_checked - cert.cells_masked;
    cert.rejected = unmasked > 0
        && (cert.heavily_repaired_cells as f64) > MAX_REPAIRED_CELL_FRACTION * unmasked as f64;
    Ok(cert)
}
