//! Spectro-polarimetric decomposition of per-channel Stokes images into the
//! nine per-pixel cue maps: for each channel, an unpolarized cue
//! `S0 − S1`, a linear-polarization cue `−S1`, and a normalized circular
//! cue `S3 / (S0 + ε)`.
//!
//! Note the unpolarized cue is taken exactly as written: when S1 < 0 it
//! exceeds the total intensity S0. The snapshot never observes S2, so the
//! measurement set does not store it.

use crate::error::{Error, Result};
use crate::sensor::{Channel, StokesImage};

/// Polarimetric modality of a cue map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Unpol = 0,
    Lp = 1,
    Cp = 2,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Unpol, Modality::Lp, Modality::Cp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Unpol => "unpol",
            Modality::Lp => "lp",
            Modality::Cp => "cp",
        }
    }
}

/// The nine cue maps: (channel R,G,B) × (modality unpol, LP, CP).
/// Unpol/LP are in radiance units; CP is dimensionless in [−1, 1].
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub width: usize,
    pub height: usize,
    pub epsilon: f64,
    maps: [Vec<f64>; 9],
}

impl MeasurementSet {
    pub fn new(width: usize, height: usize, epsilon: f64) -> Self {
        let maps = std::array::from_fn(|_| vec![0.0; width * height]);
        MeasurementSet { width, height, epsilon, maps }
    }

    pub fn from_maps(width: usize, height: usize, epsilon: f64, maps: [Vec<f64>; 9]) -> Result<Self> {
        for m in &maps {
            if m.len() != width * height {
                return Err(Error::shape(
                    format!("{} pixels per map", width * height),
                    format!("{}", m.len()),
                ));
            }
        }
        Ok(MeasurementSet { width, height, epsilon, maps })
    }

    pub fn map(&self, c: Channel, m: Modality) -> &[f64] {
        &self.maps[c.index() * 3 + m.index()]
    }

    pub fn map_mut(&mut self, c: Channel, m: Modality) -> &mut [f64] {
        &mut self.maps[c.index() * 3 + m.index()]
    }

    pub fn get(&self, x: usize, y: usize, c: Channel, m: Modality) -> f64 {
        self.maps[c.index() * 3 + m.index()][y * self.width + x]
    }

    /// Canonical file stem for a cue map, e.g. `R_unpol`.
    pub fn file_stem(c: Channel, m: Modality) -> String {
        format!("{}_{}", c.name(), m.name())
    }
}

/// Default stabilizer for the CP normalization, in normalized radiance
/// units: below the sensor-noise floor at σ = 0.01, far above denormals.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Per-channel cue extraction: unpol = S0 − S1, LP = −S1,
/// CP = S3 / (S0 + ε).
pub fn decompose(stokes: &StokesImage, epsilon: f64) -> Result<MeasurementSet> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut ms = MeasurementSet::new(stokes.width, stokes.height, epsilon);
    for c in Channel::ALL {
        for y in 0..stokes.height {
            for x in 0..stokes.width {
                let s = stokes.get(x, y, c);
                let i = y * stokes.width + x;
                ms.map_mut(c, Modality::Unpol)[i] = s.s0 - s.s1;
                ms.map_mut(c, Modality::Lp)[i] = -s.s1;
                ms.map_mut(c, Modality::Cp)[i] = s.s3 / (s.s0 + epsilon);
            }
        }
    }
    Ok(ms)
}

/// Algebraic inverse of [`decompose`]: S1 = −LP, S0 = unpol + S1,
/// S3 = CP · (S0 + ε). Must be called with the ε used to decompose.
/// S2 is not recoverable and comes back zero.
pub fn recompose(ms: &MeasurementSet, epsilon: f64) -> Result<StokesImage> {
    if epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut img = StokesImage::new(ms.width, ms.height);
    img.s2_valid = false;
    for c in Channel::ALL {
        for y in 0..ms.height {
            for x in 0..ms.width {
                let i = y * ms.width + x;
                let s1 = -ms.map(c, Modality::Lp)[i];
                let s0 = ms.map(c, Modality::Unpol)[i] + s1;
                let s3 = ms.map(c, Modality::Cp)[i] * (s0 + epsilon);
                img.set(x, y, c, crate::polarimetry::Stokes::new(s0, s1, 0.0, s3));
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarimetry::Stokes;
    use approx::assert_relative_eq;

    fn single(s: Stokes) -> StokesImage {
        let mut img = StokesImage::new(1, 1);
        for c in Channel::ALL {
            img.set(0, 0, c, s);
        }
        img
    }

    #[test]
    fn cue_arithmetic() {
        let ms = decompose(&single(Stokes::new(1.0, -0.4, 0.0, 0.1)), 1e-4).unwrap();
        assert_relative_eq!(ms.get(0, 0, Channel::R, Modality::Unpol), 1.4, epsilon = 1e-15);
        assert_relative_eq!(ms.get(0, 0, Channel::R, Modality::Lp), 0.4, epsilon = 1e-15);
        assert_relative_eq!(ms.get(0, 0, Channel::R, Modality::Cp), 0.1 / (1.0 + 1e-4), epsilon = 1e-15);
    }

    #[test]
    fn unpolarized_pixel() {
        let ms = decompose(&single(Stokes::new(1.0, 0.0, 0.0, 0.0)), 1e-4).unwrap();
        assert_relative_eq!(ms.get(0, 0, Channel::G, Modality::Unpol), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ms.get(0, 0, Channel::G, Modality::Lp), 0.0, epsilon = 1e-15);
        assert_relative_eq!(ms.get(0, 0, Channel::G, Modality::Cp), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dark_pixel_stays_finite() {
        let ms = decompose(&single(Stokes::zero()), 1e-4).unwrap();
        assert_eq!(ms.get(0, 0, Channel::B, Modality::Unpol), 0.0);
        assert_eq!(ms.get(0, 0, Channel::B, Modality::Lp), 0.0);
        assert_eq!(ms.get(0, 0, Channel::B, Modality::Cp), 0.0);
    }

    #[test]
    fn epsilon_validation() {
        assert!(decompose(&single(Stokes::zero()), 0.0).is_err());
        let ms = MeasurementSet::new(1, 1, 1e-4);
        assert!(recompose(&ms, -1.0).is_err());
    }

    #[test]
    fn forward_inverse_round_trip() {
        let img = single(Stokes::new(1.0, -0.4, 0.0, 0.1));
        let ms = decompose(&img, 1e-4).unwrap();
        let back = recompose(&ms, 1e-4).unwrap();
        let a = img.get(0, 0, Channel::R);
        let b = back.get(0, 0, Channel::R);
        assert_relative_eq!(a.s0, b.s0, epsilon = 1e-9);
        assert_relative_eq!(a.s1, b.s1, epsilon = 1e-9);
        assert_relative_eq!(a.s3, b.s3, epsilon = 1e-9);
    }

    #[test]
    fn randomized_round_trip_many_pixels() {
        use rand::Rng;
        let mut rng = crate::math::stream_rng(11, 0);
        let n = 100usize;
        let mut img = StokesImage::new(n, n);
        for p in img.pixels_mut() {
            let s0: f64 = rng.gen_range(0.0..4.0);
            let dop: f64 = rng.gen_range(0.0..1.0);
            let a: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let b: f64 = rng.gen_range(-1.0f64..1.0);
            let lin = dop * (1.0 - b * b).sqrt();
            *p = Stokes::new(s0, s0 * lin * (2.0 * a).cos(), s0 * lin * (2.0 * a).sin(), s0 * dop * b);
        }
        let ms = decompose(&img, 1e-4).unwrap();
        let back = recompose(&ms, 1e-4).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert_relative_eq!(a.s0, b.s0, epsilon = 1e-9);
            assert_relative_eq!(a.s1, b.s1, epsilon = 1e-9);
            assert_relative_eq!(a.s3, b.s3, epsilon = 1e-9);
        }
        // CP stays in bounds for physical inputs
        for c in Channel::ALL {
            for &v in ms.map(c, Modality::Cp) {
                assert!((-1.0 - 1e-6..=1.0 + 1e-6).contains(&v));
            }
        }
    }

    #[test]
    fn linear_scaling_of_intensity_cues() {
        let img = single(Stokes::new(2.0, -0.6, 0.0, 0.2));
        let scaled = single(Stokes::new(6.0, -1.8, 0.0, 0.6));
        let a = decompose(&img, 1e-4).unwrap();
        let b = decompose(&scaled, 1e-4).unwrap();
        assert_relative_eq!(
            b.get(0, 0, Channel::R, Modality::Unpol),
            3.0 * a.get(0, 0, Channel::R, Modality::Unpol),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            b.get(0, 0, Channel::R, Modality::Lp),
            3.0 * a.get(0, 0, Channel::R, Modality::Lp),
            epsilon = 1e-12
        );
    }
}
