//! Stokes–Mueller algebra: polarization states, ideal optical elements,
//! quarter-wave-plate modulation, reference-frame rotation, and the derived
//! AoLP/DoP/CoP descriptors.
//!
//! Conventions. A beam propagating along unit vector `d` carries a Stokes
//! basis `(e_x, e_y)` with `e_y = d × e_x`; `s1 = I(e_x) − I(e_y)` and
//! `s2 = I(+45°) − I(−45°)` with +45° rotated from `e_x` toward `e_y`.
//! A basis rotated counterclockwise by χ (looking against `d`, from `e_x`
//! toward `e_y`) sees `s' = R(χ)·s` with the rotator returned by
//! [`rotator`]. Everything is double precision.

use crate::error::{Error, Result};
use crate::math::{Cplx, Real, Vec3};

/// Polarization state of a beam: total intensity and the three
/// polarization difference components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StokesVector<R: Real = f64> {
    pub s0: R,
    pub s1: R,
    pub s2: R,
    pub s3: R,
}

pub type Stokes = StokesVector<f64>;

impl<R: Real> StokesVector<R> {
    pub fn new(s0: R, s1: R, s2: R, s3: R) -> Self {
        StokesVector { s0, s1, s2, s3 }
    }

    pub fn zero() -> Self {
        StokesVector::new(R::zero(), R::zero(), R::zero(), R::zero())
    }

    pub fn unpolarized(intensity: R) -> Self {
        StokesVector::new(intensity, R::zero(), R::zero(), R::zero())
    }

    pub fn scale(self, k: R) -> Self {
        StokesVector::new(self.s0 * k, self.s1 * k, self.s2 * k, self.s3 * k)
    }

    pub fn add(self, o: Self) -> Self {
        StokesVector::new(self.s0 + o.s0, self.s1 + o.s1, self.s2 + o.s2, self.s3 + o.s3)
    }

    /// Magnitude of the polarized part, sqrt(s1² + s2² + s3²).
    pub fn polarized(self) -> R {
        (self.s1 * self.s1 + self.s2 * self.s2 + self.s3 * self.s3).sqrt()
    }
}

impl Stokes {
    /// Physicality: s0 ≥ 0 and s0 ≥ |polarized part|, both within
    /// `rel · |s0|`.
    pub fn is_physical(&self, rel: f64) -> bool {
        let tol = rel * self.s0.abs();
        self.s0 >= -tol && self.polarized() <= self.s0 + tol
    }
}

/// 4×4 real linear map on Stokes vectors. Row-major; `m[0][0]` is the
/// (0,0) entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuellerMatrix<R: Real = f64> {
    pub m: [[R; 4]; 4],
}

pub type Mueller = MuellerMatrix<f64>;

impl<R: Real> MuellerMatrix<R> {
    pub fn from_rows(m: [[R; 4]; 4]) -> Self {
        MuellerMatrix { m }
    }

    pub fn zero() -> Self {
        MuellerMatrix { m: [[R::zero(); 4]; 4] }
    }

    pub fn identity() -> Self {
        let mut m = [[R::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = R::one();
        }
        MuellerMatrix { m }
    }

    pub fn diagonal(d: [R; 4]) -> Self {
        let mut m = [[R::zero(); 4]; 4];
        for i in 0..4 {
            m[i][i] = d[i];
        }
        MuellerMatrix { m }
    }

    /// Matrix–vector product; the component-wise 4×4 action on a state.
    pub fn apply(&self, s: StokesVector<R>) -> StokesVector<R> {
        let v = [s.s0, s.s1, s.s2, s.s3];
        let mut out = [R::zero(); 4];
        for i in 0..4 {
            let mut acc = R::zero();
            for j in 0..4 {
                acc += self.m[i][j] * v[j];
            }
            out[i] = acc;
        }
        StokesVector::new(out[0], out[1], out[2], out[3])
    }

    pub fn matmul(&self, o: &Self) -> Self {
        let mut r = [[R::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = R::zero();
                for k in 0..4 {
                    acc += self.m[i][k] * o.m[k][j];
                }
                r[i][j] = acc;
            }
        }
        MuellerMatrix { m: r }
    }

    pub fn transpose(&self) -> Self {
        let mut r = [[R::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = self.m[j][i];
            }
        }
        MuellerMatrix { m: r }
    }

    pub fn scale(&self, k: R) -> Self {
        let mut r = self.m;
        for row in r.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * k;
            }
        }
        MuellerMatrix { m: r }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.m;
        for i in 0..4 {
            for j in 0..4 {
                r[i][j] = r[i][j] + o.m[i][j];
            }
        }
        MuellerMatrix { m: r }
    }
}

impl Mueller {
    pub fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for row in &self.m {
            for v in row {
                acc += v * v;
            }
        }
        acc.sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn frobenius_distance(&self, o: &Mueller) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let d = self.m[i][j] - o.m[i][j];
                acc += d * d;
            }
        }
        acc.sqrt()
    }
}

/// The fixed quarter-wave-plate modulation matrix: rows send
/// (s0,s1,s2,s3) to (s0,s1,s3,−s2).
pub fn qwp_matrix<R: Real>() -> MuellerMatrix<R> {
    let o = R::zero();
    let l = R::one();
    MuellerMatrix::from_rows([
        [l, o, o, o],
        [o, l, o, o],
        [o, o, o, l],
        [o, o, -l, o],
    ])
}

/// Quarter-wave-plate modulation of a state: `[s0, s1, s3, −s2]`.
pub fn qwp_modulate<R: Real>(s: StokesVector<R>) -> StokesVector<R> {
    StokesVector::new(s.s0, s.s1, s.s3, -s.s2)
}

/// Ideal linear polarizer with transmission axis at `theta` radians from
/// the basis `e_x`, counterclockwise toward `e_y`. First row is
/// ½[1, cos2θ, sin2θ, 0].
pub fn linear_polarizer(theta: f64) -> Mueller {
    let c = (2.0 * theta).cos();
    let s = (2.0 * theta).sin();
    let h = 0.5;
    Mueller::from_rows([
        [h, h * c, h * s, 0.0],
        [h * c, h * c * c, h * c * s, 0.0],
        [h * s, h * c * s, h * s * s, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
}

/// Stokes rotator R(θ): the state observed from a basis rotated
/// counterclockwise by θ.
pub fn rotator<R: Real>(theta: R) -> MuellerMatrix<R> {
    let two = R::from_f64(2.0);
    let c = (theta * two).cos();
    let s = (theta * two).sin();
    let o = R::zero();
    let l = R::one();
    MuellerMatrix::from_rows([
        [l, o, o, o],
        [o, c, s, o],
        [o, -s, c, o],
        [o, o, o, l],
    ])
}

/// Reference-frame rotation of an optical element: the element `m`
/// physically rotated counterclockwise by θ, i.e. R(−θ)·M·R(θ).
pub fn rotate_frame(m: &Mueller, theta: f64) -> Mueller {
    rotator(-theta).matmul(m).matmul(&rotator(theta))
}

/// Recovers the linear Stokes components measured behind four polarizer
/// orientations: s0 = ½ ΣI, s1 = I₀ − I₉₀, s2 = I₄₅ − I₁₃₅. When the light
/// has passed the QWP these equal (S0, S1, S3) of the pre-plate beam.
pub fn stokes_from_measurements(i0: f64, i45: f64, i90: f64, i135: f64) -> (f64, f64, f64) {
    let s0 = 0.5 * (i0 + i45 + i90 + i135);
    let s1 = i0 - i90;
    let s2 = i45 - i135;
    (s0, s1, s2)
}

/// Degree of polarization, angle of linear polarization, and chirality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationDescriptors {
    /// Degree of polarization in [0, 1] (clamped).
    pub dop: f64,
    /// Angle of linear polarization in [0, π) radians.
    pub aolp: f64,
    /// Chirality (normalized s3) in [−1, 1] (clamped).
    pub cop: f64,
}

/// AoLP/DoP/CoP of a state. Errors on non-positive total intensity.
pub fn descriptors(s: Stokes) -> Result<PolarizationDescriptors> {
    if s.s0 <= 0.0 {
        return Err(Error::Degenerate(format!("descriptors need s0 > 0, got {}", s.s0)));
    }
    let dop = (s.polarized() / s.s0).clamp(0.0, 1.0);
    let mut aolp = 0.5 * s.s2.atan2(s.s1);
    if aolp < 0.0 {
        aolp += std::f64::consts::PI;
    }
    if aolp >= std::f64::consts::PI {
        aolp -= std::f64::consts::PI;
    }
    let cop = (s.s3 / s.s0).clamp(-1.0, 1.0);
    Ok(PolarizationDescriptors { dop, aolp, cop })
}

/// 2×2 complex Jones matrix over a generic scalar.
pub type Jones<R> = [[Cplx<R>; 2]; 2];

/// Mueller matrix of a deterministic (Jones) optical interaction:
/// M_ij = ½ tr(σ_i J σ_j J†) over the Pauli set (I, σz, σx, σy).
pub fn mueller_from_jones<R: Real>(j: Jones<R>) -> MuellerMatrix<R> {
    let jd = adjoint(j);
    let mut m = [[R::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        for (q, out) in row.iter_mut().enumerate() {
            let a = mat2_mul(pauli::<R>(i), mat2_mul(j, mat2_mul(pauli::<R>(q), jd)));
            *out = (a[0][0].re + a[1][1].re) * R::from_f64(0.5);
        }
    }
    MuellerMatrix::from_rows(m)
}

pub(crate) fn pauli<R: Real>(i: usize) -> Jones<R> {
    let o = Cplx::from_re(R::zero());
    let l = Cplx::from_re(R::one());
    let neg = Cplx::from_re(-R::one());
    let pi = Cplx::new(R::zero(), R::one());
    let ni = Cplx::new(R::zero(), -R::one());
    match i {
        0 => [[l, o], [o, l]],
        1 => [[l, o], [o, neg]],
        2 => [[o, l], [l, o]],
        3 => [[o, ni], [pi, o]],
        _ => unreachable!("pauli index out of range"),
    }
}

pub(crate) fn mat2_mul<R: Real>(a: Jones<R>, b: Jones<R>) -> Jones<R> {
    let mut r = [[Cplx::from_re(R::zero()); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

pub(crate) fn adjoint<R: Real>(a: Jones<R>) -> Jones<R> {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

/// Signed rotation angle χ from basis axis `ex_from` to `ex_to`, both
/// transverse to the propagation direction `d`, such that
/// `s_to = rotator(χ) · s_from`.
pub fn basis_rotation_angle(d: Vec3, ex_from: Vec3, ex_to: Vec3) -> f64 {
    let sin = d.dot(ex_from.cross(ex_to));
    let cos = ex_from.dot(ex_to);
    sin.atan2(cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn assert_stokes_eq(a: Stokes, b: Stokes, eps: f64) {
        assert_relative_eq!(a.s0, b.s0, epsilon = eps);
        assert_relative_eq!(a.s1, b.s1, epsilon = eps);
        assert_relative_eq!(a.s2, b.s2, epsilon = eps);
        assert_relative_eq!(a.s3, b.s3, epsilon = eps);
    }

    fn assert_mueller_eq(a: &Mueller, b: &Mueller, eps: f64) {
        for i in 0..4 {
            for j in 0..4 {
                assert!(
                    (a.m[i][j] - b.m[i][j]).abs() <= eps,
                    "entry ({i},{j}): {} vs {}",
                    a.m[i][j],
                    b.m[i][j]
                );
            }
        }
    }

    #[test]
    fn apply_identity_and_zero() {
        let s = Stokes::new(1.0, 0.5, 0.3, 0.2);
        assert_eq!(Mueller::identity().apply(s), s);
        assert_eq!(Mueller::zero().apply(s), Stokes::zero());
    }

    #[test]
    fn apply_qwp_matrix() {
        let s = Stokes::new(1.0, 0.5, 0.3, 0.2);
        let out = qwp_matrix::<f64>().apply(s);
        assert_stokes_eq(out, Stokes::new(1.0, 0.5, 0.2, -0.3), 0.0);
    }

    #[test]
    fn qwp_modulate_examples() {
        assert_eq!(qwp_modulate(Stokes::new(1.0, 0.0, 0.0, 1.0)), Stokes::new(1.0, 0.0, 1.0, 0.0));
        assert_eq!(qwp_modulate(Stokes::new(1.0, 0.0, 0.0, 0.0)), Stokes::new(1.0, 0.0, 0.0, 0.0));
        // oracle: direct 4×4 product
        let s = Stokes::new(2.0, 1.0, -0.5, 0.25);
        let via_matrix = qwp_matrix::<f64>().apply(s);
        assert_eq!(qwp_modulate(s), via_matrix);
        assert_eq!(via_matrix, Stokes::new(2.0, 1.0, 0.25, 0.5));
    }

    #[test]
    fn malus_law() {
        let horizontal = Stokes::new(1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(linear_polarizer(0.0).apply(horizontal).s0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(linear_polarizer(FRAC_PI_2).apply(horizontal).s0, 0.0, epsilon = 1e-15);
        // Malus-law oracle: ½(s0 + cos2θ·s1)
        let theta = FRAC_PI_4;
        let expect = 0.5 * (1.0 + (2.0 * theta).cos());
        assert_relative_eq!(linear_polarizer(theta).apply(horizontal).s0, expect, epsilon = 1e-15);
        assert_relative_eq!(expect, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rotate_frame_matches_direct_construction() {
        let lp = linear_polarizer(0.0);
        assert_mueller_eq(&rotate_frame(&lp, 0.0), &lp, 0.0);
        assert_mueller_eq(&rotate_frame(&Mueller::identity(), 1.234), &Mueller::identity(), 1e-15);
        assert_mueller_eq(&rotate_frame(&lp, FRAC_PI_4), &linear_polarizer(FRAC_PI_4), 1e-15);
        assert_mueller_eq(&rotate_frame(&lp, 0.7), &linear_polarizer(0.7), 1e-15);
    }

    #[test]
    fn measurement_recovery_examples() {
        assert_eq!(stokes_from_measurements(0.5, 0.5, 0.5, 0.5), (1.0, 0.0, 0.0));
        // simulated polarizer measurements of [1,1,0,0]
        let s = Stokes::new(1.0, 1.0, 0.0, 0.0);
        let meas = |theta: f64| linear_polarizer(theta).apply(s).s0;
        let (s0, s1, s2) =
            stokes_from_measurements(meas(0.0), meas(FRAC_PI_4), meas(FRAC_PI_2), meas(3.0 * FRAC_PI_4));
        assert_relative_eq!(s0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s2, 0.0, epsilon = 1e-15);
        // measurements of QWP-modulated right-circular light
        let circ = qwp_modulate(Stokes::new(1.0, 0.0, 0.0, 1.0));
        let meas = |theta: f64| linear_polarizer(theta).apply(circ).s0;
        let (s0, s1, s2) =
            stokes_from_measurements(meas(0.0), meas(FRAC_PI_4), meas(FRAC_PI_2), meas(3.0 * FRAC_PI_4));
        assert_relative_eq!(s0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s2, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn descriptor_examples() {
        let d = descriptors(Stokes::new(1.0, 1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(d.dop, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.aolp, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.cop, 0.0, epsilon = 1e-15);

        let d = descriptors(Stokes::new(1.0, 0.0, 0.0, -1.0)).unwrap();
        assert_relative_eq!(d.dop, 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.cop, -1.0, epsilon = 1e-15);

        let d = descriptors(Stokes::new(2.0, 1.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(d.dop, std::f64::consts::SQRT_2 / 2.0, epsilon = 1e-15);
        assert_relative_eq!(d.aolp, PI / 8.0, epsilon = 1e-15);

        assert!(descriptors(Stokes::new(0.0, 0.0, 0.0, 0.0)).is_err());
        assert!(descriptors(Stokes::new(-1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn jones_consistency() {
        // polarizer at 0 from its Jones projector
        let o = Cplx::from_re(0.0);
        let l = Cplx::from_re(1.0);
        let lp0 = mueller_from_jones::<f64>([[l, o], [o, o]]);
        assert_mueller_eq(&lp0, &linear_polarizer(0.0), 1e-15);
        // basis-change Jones matches the Stokes rotator
        let chi = 0.41f64;
        let (s, c) = chi.sin_cos();
        let j = [
            [Cplx::from_re(c), Cplx::from_re(s)],
            [Cplx::from_re(-s), Cplx::from_re(c)],
        ];
        assert_mueller_eq(&mueller_from_jones(j), &rotator(chi), 1e-15);
    }

    #[test]
    fn basis_rotation_angle_sign() {
        let d = Vec3::new(0.0, 0.0, 1.0);
        let ex = Vec3::new(1.0, 0.0, 0.0);
        let ey = d.cross(ex);
        let chi = FRAC_PI_4;
        let ex2 = ex * chi.cos() + ey * chi.sin();
        assert_relative_eq!(basis_rotation_angle(d, ex, ex2), chi, epsilon = 1e-15);
        // horizontal light seen from the rotated basis sits at −45°
        let s = rotator(basis_rotation_angle(d, ex, ex2)).apply(Stokes::new(1.0, 1.0, 0.0, 0.0));
        assert_stokes_eq(s, Stokes::new(1.0, 0.0, -1.0, 0.0), 1e-15);
    }

    proptest! {
        #[test]
        fn qwp_has_order_four(
            s0 in 0.1f64..10.0,
            p in 0.0f64..1.0,
            a in 0.0f64..PI,
            b in -1.0f64..1.0,
        ) {
            let lin = p * (1.0 - b * b).sqrt();
            let s = Stokes::new(s0, s0 * lin * (2.0 * a).cos(), s0 * lin * (2.0 * a).sin(), s0 * p * b);
            let mut t = s;
            for _ in 0..4 {
                t = qwp_modulate(t);
            }
            prop_assert!((t.s0 - s.s0).abs() < 1e-12);
            prop_assert!((t.s1 - s.s1).abs() < 1e-12);
            prop_assert!((t.s2 - s.s2).abs() < 1e-12);
            prop_assert!((t.s3 - s.s3).abs() < 1e-12);
        }

        #[test]
        fn frame_rotation_composes(t1 in -3.0f64..3.0, t2 in -3.0f64..3.0) {
            let m = linear_polarizer(0.3);
            let a = rotate_frame(&m, t1 + t2);
            let b = rotate_frame(&rotate_frame(&m, t1), t2);
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!((a.m[i][j] - b.m[i][j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn measurement_identity_exact(
            s1 in -0.5f64..0.5,
            s2 in -0.5f64..0.5,
            s3 in -0.5f64..0.5,
        ) {
            let s = Stokes::new(1.0, s1, s2, s3);
            let meas = |theta: f64| linear_polarizer(theta).apply(s).s0;
            let (r0, r1, r2) = stokes_from_measurements(
                meas(0.0), meas(FRAC_PI_4), meas(FRAC_PI_2), meas(3.0 * FRAC_PI_4));
            prop_assert!((r0 - s.s0).abs() < 1e-12);
            prop_assert!((r1 - s.s1).abs() < 1e-12);
            prop_assert!((r2 - s.s2).abs() < 1e-12);
        }
    }
}
