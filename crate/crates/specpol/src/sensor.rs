//! Division-of-focal-plane polarization camera behind a quarter-wave plate:
//! four-orientation intensity formation into a 2×2 superpixel mosaic, and
//! reconstruction back to per-channel Stokes images.
//!
//! Color is carried as three independent planes; the interleaved
//! color-filter mosaic of the real sensor is not simulated. The superpixel
//! orientation layout is fixed to {0°, 45°; 135°, 90°} (row-major within
//! each 2×2 block) and recorded in the mosaic sidecar on disk.

use crate::error::{Error, Result};
use crate::exec;
use crate::math::stream_rng;
use crate::polarimetry::{linear_polarizer, qwp_modulate, stokes_from_measurements, Stokes};
use rand_distr::{Distribution, StandardNormal};

/// Spectral channel of the RGB camera / display.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    R = 0,
    G = 1,
    B = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::R, Channel::G, Channel::B];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::R => "R",
            Channel::G => "G",
            Channel::B => "B",
        }
    }
}

/// Per-pixel, per-channel Stokes image.
///
/// `s2_valid` is false for images reconstructed from mosaic captures: the
/// snapshot measures the modulated linear components only, which map to
/// (S0, S1, S3) of the pre-plate light; S2 is unobserved and stored as 0.
#[derive(Debug, Clone)]
pub struct StokesImage {
    pub width: usize,
    pub height: usize,
    /// Layout: `(y * width + x) * 3 + channel`.
    data: Vec<Stokes>,
    pub s2_valid: bool,
}

impl StokesImage {
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        StokesImage { width, height, data: vec![Stokes::zero(); width * height * 3], s2_valid: true }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<Stokes>, s2_valid: bool) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(
                format!("{} stokes samples", width * height * 3),
                format!("{}", data.len()),
            ));
        }
        Ok(StokesImage { width, height, data, s2_valid })
    }

    pub fn get(&self, x: usize, y: usize, c: Channel) -> Stokes {
        self.data[(y * self.width + x) * 3 + c.index()]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Channel, s: Stokes) {
        self.data[(y * self.width + x) * 3 + c.index()] = s;
    }

    pub fn pixels(&self) -> &[Stokes] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [Stokes] {
        &mut self.data
    }
}

/// Mosaic layout constant: orientation (radians) of the polarizer at
/// position (dx, dy) inside each 2×2 superpixel.
pub fn mosaic_orientation(dx: usize, dy: usize) -> f64 {
    use std::f64::consts::FRAC_PI_4;
    match (dx, dy) {
        (0, 0) => 0.0,
        (1, 0) => FRAC_PI_4,
        (0, 1) => 3.0 * FRAC_PI_4,
        (1, 1) => 2.0 * FRAC_PI_4,
        _ => unreachable!("superpixel offsets are 0 or 1"),
    }
}

/// Human-readable layout declaration written to mosaic sidecars.
pub const MOSAIC_LAYOUT_DECLARATION: &str = "superpixel_layout = 0,45;135,90 (degrees, row-major 2x2)";

/// Raw mosaic capture: per-channel intensity planes at twice the Stokes
/// image resolution.
#[derive(Debug, Clone)]
pub struct RawMosaic {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
}

impl RawMosaic {
    pub fn intensity(&self, x: usize, y: usize, c: Channel) -> f64 {
        self.planes[c.index()][y * self.width + x]
    }
}

/// Simulates the snapshot: each superpixel's four intensities are
/// `[LP(θ) · M_QWP · S]₀` at the superpixel's shared Stokes value, with
/// optional Gaussian noise of standard deviation `noise_sigma · I`.
/// Negative noisy samples are clamped to zero.
pub fn expose(scene: &StokesImage, noise_sigma: f64, seed: u64) -> RawMosaic {
    assert!(noise_sigma >= 0.0, "noise_sigma must be nonnegative");
    let (w, h) = (scene.width, scene.height);
    let polarizers = [
        linear_polarizer(mosaic_orientation(0, 0)),
        linear_polarizer(mosaic_orientation(1, 0)),
        linear_polarizer(mosaic_orientation(0, 1)),
        linear_polarizer(mosaic_orientation(1, 1)),
    ];

    let rows = exec::map_indices(h, |py| {
        let mut row = [vec![0.0f64; 2 * w * 2], vec![0.0f64; 2 * w * 2], vec![0.0f64; 2 * w * 2]];
        for px in 0..w {
            let mut rng = stream_rng(seed, (py * w + px) as u64);
            for c in Channel::ALL {
                let modulated = qwp_modulate(scene.get(px, py, c));
                for (slot, lp) in polarizers.iter().enumerate() {
                    let (dx, dy) = [(0, 0), (1, 0), (0, 1), (1, 1)][slot];
                    let mut i = lp.apply(modulated).s0;
                    if noise_sigma > 0.0 {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        i += noise_sigma * i * g;
                    }
                    row[c.index()][dy * 2 * w + 2 * px + dx] = i.max(0.0);
                }
            }
        }
        row
    });

    let mut planes = [vec![0.0; 4 * w * h], vec![0.0; 4 * w * h], vec![0.0; 4 * w * h]];
    for (py, row) in rows.into_iter().enumerate() {
        for c in 0..3 {
            let dst = &mut planes[c][py * 2 * (2 * w)..(py * 2 + 2) * (2 * w)];
            dst.copy_from_slice(&row[c]);
        }
    }
    RawMosaic { width: 2 * w, height: 2 * h, planes }
}

/// Reconstructs per-channel Stokes images by 2×2 block aggregation.
/// Output components: S0, S1 and S3 of the pre-plate light; S2 is
/// unobservable through the plate and set to zero (`s2_valid = false`).
pub fn reconstruct(raw: &RawMosaic) -> Result<StokesImage> {
    if raw.width % 2 != 0 || raw.height % 2 != 0 {
        return Err(Error::shape("even mosaic dimensions", format!("{}x{}", raw.width, raw.height)));
    }
    let (w, h) = (raw.width / 2, raw.height / 2);
    let mut img = StokesImage::new(w, h);
    img.s2_valid = false;
    for y in 0..h {
        for x in 0..w {
            for c in Channel::ALL {
                let i0 = raw.intensity(2 * x, 2 * y, c);
                let i45 = raw.intensity(2 * x + 1, 2 * y, c);
                let i135 = raw.intensity(2 * x, 2 * y + 1, c);
                let i90 = raw.intensity(2 * x + 1, 2 * y + 1, c);
                let (s0, s1, s2mod) = stokes_from_measurements(i0, i45, i90, i135);
                img.set(x, y, c, Stokes::new(s0, s1, 0.0, s2mod));
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant_image(s: Stokes, w: usize, h: usize) -> StokesImage {
        let mut img = StokesImage::new(w, h);
        for p in img.pixels_mut() {
            *p = s;
        }
        img
    }

    #[test]
    fn unpolarized_halves() {
        let img = constant_image(Stokes::new(1.0, 0.0, 0.0, 0.0), 4, 4);
        let raw = expose(&img, 0.0, 0);
        for plane in &raw.planes {
            for &v in plane {
                assert_relative_eq!(v, 0.5, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn vertical_linear_through_mosaic() {
        let img = constant_image(Stokes::new(1.0, -1.0, 0.0, 0.0), 2, 2);
        let raw = expose(&img, 0.0, 0);
        assert_relative_eq!(raw.intensity(0, 0, Channel::R), 0.0, epsilon = 1e-15); // 0°
        assert_relative_eq!(raw.intensity(1, 0, Channel::R), 0.5, epsilon = 1e-15); // 45°
        assert_relative_eq!(raw.intensity(0, 1, Channel::R), 0.5, epsilon = 1e-15); // 135°
        assert_relative_eq!(raw.intensity(1, 1, Channel::R), 1.0, epsilon = 1e-15); // 90°
    }

    #[test]
    fn circular_maps_to_45_channel() {
        let img = constant_image(Stokes::new(1.0, 0.0, 0.0, 1.0), 2, 2);
        let raw = expose(&img, 0.0, 0);
        assert_relative_eq!(raw.intensity(1, 0, Channel::G), 1.0, epsilon = 1e-15); // 45°
        assert_relative_eq!(raw.intensity(0, 1, Channel::G), 0.0, epsilon = 1e-15); // 135°
    }

    #[test]
    fn reconstruct_example_superpixel() {
        let planes = [vec![0.5, 1.0, 0.0, 0.5], vec![0.5, 1.0, 0.0, 0.5], vec![0.5, 1.0, 0.0, 0.5]];
        let raw = RawMosaic { width: 2, height: 2, planes };
        let img = reconstruct(&raw).unwrap();
        let s = img.get(0, 0, Channel::B);
        assert_relative_eq!(s.s0, 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.s1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.s3, 1.0, epsilon = 1e-15);
        assert!(!img.s2_valid);
    }

    #[test]
    fn zero_raw_gives_zero_stokes() {
        let raw = RawMosaic { width: 4, height: 4, planes: [vec![0.0; 16], vec![0.0; 16], vec![0.0; 16]] };
        let img = reconstruct(&raw).unwrap();
        for p in img.pixels() {
            assert_eq!(*p, Stokes::zero());
        }
    }

    #[test]
    fn odd_mosaic_rejected() {
        let raw = RawMosaic { width: 3, height: 4, planes: [vec![0.0; 12], vec![0.0; 12], vec![0.0; 12]] };
        assert!(reconstruct(&raw).is_err());
    }

    #[test]
    fn noiseless_round_trip_recovers_s013() {
        let mut img = StokesImage::new(8, 8);
        let mut k = 0u32;
        for y in 0..8 {
            for x in 0..8 {
                for c in Channel::ALL {
                    // assorted physical states
                    let t = k as f64 * 0.37;
                    let p = 0.8 * ((t * 1.7).sin() * 0.5 + 0.5);
                    let s3 = p * (t * 0.9).sin();
                    let lin = (p * p - s3 * s3).max(0.0).sqrt();
                    img.set(x, y, c, Stokes::new(1.0 + t.cos().abs(), lin * (2.0 * t).cos(), lin * (2.0 * t).sin(), s3));
                    k += 1;
                }
            }
        }
        let rec = reconstruct(&expose(&img, 0.0, 7)).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                for c in Channel::ALL {
                    let a = img.get(x, y, c);
                    let b = rec.get(x, y, c);
                    assert_relative_eq!(a.s0, b.s0, epsilon = 1e-12);
                    assert_relative_eq!(a.s1, b.s1, epsilon = 1e-12);
                    assert_relative_eq!(a.s3, b.s3, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn exposure_deterministic_per_seed() {
        let img = constant_image(Stokes::new(1.0, 0.2, 0.1, 0.3), 6, 6);
        let a = expose(&img, 0.02, 42);
        let b = expose(&img, 0.02, 42);
        let c = expose(&img, 0.02, 43);
        assert_eq!(a.planes, b.planes);
        assert_ne!(a.planes, c.planes);
    }
}
