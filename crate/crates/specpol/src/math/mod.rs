//! Small numeric building blocks: 3-vectors, a generic scalar trait used to
//! run the reflectance chain on either `f64` or forward-mode dual numbers,
//! complex arithmetic over that trait, and deterministic reductions/RNG.

mod dual;
mod real;

pub use dual::Dual;
pub use real::Real;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plain 3-vector over f64 for geometry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    /// Builds an orthonormal tangent pair (t, b) so that (t, b, self) is a
    /// right-handed frame. `self` must be unit length.
    pub fn tangent_frame(self) -> (Vec3, Vec3) {
        let a = if self.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
        let t = self.cross(a).normalized();
        let b = self.cross(t);
        (t, b)
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

impl std::ops::Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        self.scale(1.0 / s)
    }
}

/// Complex number over a generic scalar. Only what the Fresnel chain needs.
#[derive(Debug, Clone, Copy)]
pub struct Cplx<R: Real> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Cplx<R> {
    pub fn new(re: R, im: R) -> Self {
        Cplx { re, im }
    }

    pub fn from_re(re: R) -> Self {
        Cplx { re, im: R::from_f64(0.0) }
    }

    pub fn conj(self) -> Self {
        Cplx::new(self.re, -self.im)
    }

    pub fn norm_sqr(self) -> R {
        self.re * self.re + self.im * self.im
    }

    /// Principal square root.
    pub fn sqrt(self) -> Self {
        let r = self.norm_sqr().sqrt().sqrt();
        let half = R::from_f64(0.5);
        let phi = self.im.atan2(self.re) * half;
        Cplx::new(r * phi.cos(), r * phi.sin())
    }
}

impl<R: Real> std::ops::Add for Cplx<R> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Cplx::new(self.re + o.re, self.im + o.im)
    }
}

impl<R: Real> std::ops::Sub for Cplx<R> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Cplx::new(self.re - o.re, self.im - o.im)
    }
}

impl<R: Real> std::ops::Mul for Cplx<R> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Cplx::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl<R: Real> std::ops::Div for Cplx<R> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let d = o.norm_sqr();
        Cplx::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

/// Generic 3-vector over the [`Real`] scalar trait, used where derivatives
/// must flow through geometry (the fitter's normal parameters).
pub type GVec3<R> = [R; 3];

pub fn gvec<R: Real>(v: Vec3) -> GVec3<R> {
    [R::from_f64(v.x), R::from_f64(v.y), R::from_f64(v.z)]
}

pub fn gdot<R: Real>(a: GVec3<R>, b: GVec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn gcross<R: Real>(a: GVec3<R>, b: GVec3<R>) -> GVec3<R> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn gadd<R: Real>(a: GVec3<R>, b: GVec3<R>) -> GVec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn gsub<R: Real>(a: GVec3<R>, b: GVec3<R>) -> GVec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn gscale<R: Real>(a: GVec3<R>, s: R) -> GVec3<R> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn gnorm<R: Real>(a: GVec3<R>) -> R {
    gdot(a, a).sqrt()
}

pub fn gnormalize<R: Real>(a: GVec3<R>) -> GVec3<R> {
    let n = gnorm(a);
    if n.value() > 0.0 {
        gscale(a, R::one() / n)
    } else {
        a
    }
}

/// Pairwise summation over a slice. Deterministic for a given element order
/// and lower roundoff than a running sum; used by the metric reducers.
pub fn stable_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        2 => v[0] + v[1],
        n => {
            let mid = n / 2;
            stable_sum(&v[..mid]) + stable_sum(&v[mid..])
        }
    }
}

/// Mean via pairwise summation.
pub fn stable_mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        stable_sum(v) / v.len() as f64
    }
}

/// SplitMix64 step, used to derive independent stream seeds.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-item RNG stream: mixes a base seed with an item index
/// into a full 256-bit ChaCha seed. Streams for different indices are
/// statistically independent and reproducible across platforms and thread
/// counts.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908u64.wrapping_add(index);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Nodes of an `n`-point midpoint rule on [0,1): (i + 0.5)/n.
pub fn midpoints(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| (i as f64 + 0.5) / n as f64)
}
