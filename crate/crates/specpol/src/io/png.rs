//! Minimal lossless PNG writer for 8-bit visualization companions:
//! stored (uncompressed) deflate blocks, filter 0, no ancillary chunks,
//! so output bytes depend only on the pixel data.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

fn crc32(data: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (n, t) in table.iter_mut().enumerate() {
        let mut c = n as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xedb8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *t = c;
    }
    let mut c = 0xffff_ffffu32;
    for &b in data {
        c = table[((c ^ b as u32) & 0xff) as usize] ^ (c >> 8);
    }
    c ^ 0xffff_ffff
}

fn adler32(data: &[u8]) -> u32 {
    const MOD: u32 = 65521;
    let (mut a, mut b) = (1u32, 0u32);
    for chunk in data.chunks(5552) {
        for &x in chunk {
            a += x as u32;
            b += a;
        }
        a %= MOD;
        b %= MOD;
    }
    (b << 16) | a
}

fn chunk(out: &mut Vec<u8>, kind: &[u8; 4], data: &[u8]) {
    out.extend((data.len() as u32).to_be_bytes());
    out.extend(kind);
    out.extend(data);
    let mut crc_input = kind.to_vec();
    crc_input.extend(data);
    out.extend(crc32(&crc_input).to_be_bytes());
}

fn zlib_stored(raw: &[u8]) -> Vec<u8> {
    let mut z = vec![0x78, 0x01];
    let blocks: Vec<&[u8]> = if raw.is_empty() { vec![&[][..]] } else { raw.chunks(65535).collect() };
    for (i, block) in blocks.iter().enumerate() {
        let last = i + 1 == blocks.len();
        z.push(if last { 1 } else { 0 });
        let len = block.len() as u16;
        z.extend(len.to_le_bytes());
        z.extend((!len).to_le_bytes());
        z.extend(*block);
    }
    z.extend(adler32(raw).to_be_bytes());
    z
}

fn write_png(path: &Path, width: usize, height: usize, color_type: u8, pixels: &[u8]) -> Result<()> {
    let channels = if color_type == 2 { 3 } else { 1 };
    if pixels.len() != width * height * channels {
        return Err(Error::shape(
            format!("{} bytes", width * height * channels),
            format!("{}", pixels.len()),
        ));
    }
    let mut raw = Vec::with_capacity(height * (1 + width * channels));
    for y in 0..height {
        raw.push(0); // filter: none
        raw.extend(&pixels[y * width * channels..(y + 1) * width * channels]);
    }
    let mut out = vec![137u8, 80, 78, 71, 13, 10, 26, 10];
    let mut ihdr = Vec::new();
    ihdr.extend((width as u32).to_be_bytes());
    ihdr.extend((height as u32).to_be_bytes());
    ihdr.extend([8, color_type, 0, 0, 0]);
    chunk(&mut out, b"IHDR", &ihdr);
    chunk(&mut out, b"IDAT", &zlib_stored(&raw));
    chunk(&mut out, b"IEND", &[]);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

/// Writes an 8-bit RGB PNG; `pixels` is row-major RGB from the top-left.
pub fn write_png_rgb8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    write_png(path, width, height, 2, pixels)
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png_gray8(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    write_png(path, width, height, 0, pixels)
}

/// Maps linear radiance to an 8-bit sRGB value after dividing by `scale`.
pub fn tonemap_srgb(v: f64, scale: f64) -> u8 {
    let x = (v / scale.max(1e-12)).clamp(0.0, 1.0);
    let g = if x <= 0.003_130_8 { 12.92 * x } else { 1.055 * x.powf(1.0 / 2.4) - 0.055 };
    (g * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        let px: Vec<u8> = (0..12 * 7 * 3).map(|i| (i * 7 % 256) as u8).collect();
        write_png_rgb8(&a, 12, 7, &px).unwrap();
        write_png_rgb8(&b, 12, 7, &px).unwrap();
        let bytes = std::fs::read(&a).unwrap();
        assert_eq!(bytes, std::fs::read(&b).unwrap());
        assert_eq!(&bytes[..8], &[137, 80, 78, 71, 13, 10, 26, 10]);
        assert_eq!(&bytes[12..16], b"IHDR");
        assert_eq!(&bytes[bytes.len() - 8..bytes.len() - 4], b"IEND");
    }

    #[test]
    fn zlib_checksum_known_value() {
        // adler32("Wikipedia") = 0x11E60398
        assert_eq!(adler32(b"Wikipedia"), 0x11e6_0398);
        // crc32 of empty input is 0
        assert_eq!(crc32(&[]), 0);
        // crc32("123456789") = 0xCBF43926
        assert_eq!(crc32(b"123456789"), 0xcbf4_3926);
    }

    #[test]
    fn tonemap_endpoints() {
        assert_eq!(tonemap_srgb(0.0, 1.0), 0);
        assert_eq!(tonemap_srgb(1.0, 1.0), 255);
        assert_eq!(tonemap_srgb(2.0, 1.0), 255);
        assert!(tonemap_srgb(0.5, 1.0) > 128); // gamma brightens mid-tones
    }
}
