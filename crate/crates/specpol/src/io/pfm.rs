//! Portable float map reader/writer.
//!
//! Header: `PF` (3-channel color) or `Pf` (grayscale), then `width height`,
//! then the scale line whose sign declares endianness. This implementation
//! always writes `-1.0` (little-endian) and follows the PFM convention of
//! bottom-to-top scanline order. Payloads must be NaN-free; a NaN is a
//! write error.

use crate::error::{Error, Result};
use byteorder::{ByteOrder, LittleEndian};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// In-memory float image, row-major from the top-left, `channels` ∈ {1, 3}.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Layout: `(y * width + x) * channels + c`, y = 0 at the top.
    pub data: Vec<f32>,
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "PFM supports 1 or 3 channels");
        FloatImage { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn from_f64(width: usize, height: usize, channels: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), width * height * channels);
        FloatImage {
            width,
            height,
            channels,
            data: data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

fn read_token(r: &mut impl BufRead) -> Result<String> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match r.read_exact(&mut byte) {
            Ok(()) => {}
            Err(_) => break,
        }
        if byte[0].is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(byte[0]);
        if tok.len() > 64 {
            return Err(Error::format("PFM", "header token too long"));
        }
    }
    if tok.is_empty() {
        return Err(Error::format("PFM", "unexpected end of header"));
    }
    String::from_utf8(tok).map_err(|_| Error::format("PFM", "non-ASCII header token"))
}

/// Reads a PFM file.
pub fn read_float_image(path: &Path) -> Result<FloatImage> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);

    let magic = read_token(&mut r)?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::format("PFM", format!("bad magic {other:?}"))),
    };
    let width: usize = read_token(&mut r)?
        .parse()
        .map_err(|_| Error::format("PFM", "bad width"))?;
    let height: usize = read_token(&mut r)?
        .parse()
        .map_err(|_| Error::format("PFM", "bad height"))?;
    if width == 0 || height == 0 {
        return Err(Error::format("PFM", "zero dimension"));
    }
    let scale: f64 = read_token(&mut r)?
        .parse()
        .map_err(|_| Error::format("PFM", "bad scale token"))?;
    let little_endian = scale < 0.0;

    let n = width * height * channels;
    let mut payload = vec![0u8; n * 4];
    r.read_exact(&mut payload)
        .map_err(|_| Error::format("PFM", format!("payload shorter than {n} samples declared by header")))?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format("PFM", "payload longer than header dimensions"));
    }

    let mut img = FloatImage::new(width, height, channels);
    let row_len = width * channels;
    for y_file in 0..height {
        let y = height - 1 - y_file; // PFM rows are bottom-up
        for i in 0..row_len {
            let off = (y_file * row_len + i) * 4;
            let bits = if little_endian {
                LittleEndian::read_u32(&payload[off..off + 4])
            } else {
                u32::from_be_bytes(payload[off..off + 4].try_into().unwrap())
            };
            img.data[y * row_len + i] = f32::from_bits(bits);
        }
    }
    Ok(img)
}

/// Writes a PFM file (little-endian, scale −1.0). NaN anywhere in the
/// payload is an error; nothing is written in that case.
pub fn write_float_image(img: &FloatImage, path: &Path) -> Result<()> {
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::shape(
            format!("{} samples", img.width * img.height * img.channels),
            format!("{}", img.data.len()),
        ));
    }
    if img.data.iter().any(|v| v.is_nan()) {
        return Err(Error::format("PFM", "payload contains NaN"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    write!(w, "{magic}\n{} {}\n-1.0\n", img.width, img.height).map_err(|e| Error::io(path, e))?;
    let row_len = img.width * img.channels;
    let mut buf = vec![0u8; row_len * 4];
    for y_file in 0..img.height {
        let y = img.height - 1 - y_file;
        for i in 0..row_len {
            LittleEndian::write_u32(&mut buf[i * 4..i * 4 + 4], img.data[y * row_len + i].to_bits());
        }
        w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pfm");
        let mut img = FloatImage::new(2, 2, 1);
        img.data = vec![0.0, -1.5, 3.25e-20, 1.0e20];
        write_float_image(&img, &path).unwrap();
        let back = read_float_image(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn color_round_trip_with_denormals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pfm");
        let mut img = FloatImage::new(3, 2, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = f32::from_bits(1 + i as u32); // denormals
        }
        write_float_image(&img, &path).unwrap();
        let back = read_float_image(&path).unwrap();
        assert_eq!(img.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   back.data.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        // header says 4x4 gray but payload holds 3x4 samples
        let mut bytes = b"Pf\n4 4\n-1.0\n".to_vec();
        bytes.extend(std::iter::repeat(0u8).take(3 * 4 * 4));
        std::fs::write(&path, bytes).unwrap();
        let err = read_float_image(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn nan_payload_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.pfm");
        let mut img = FloatImage::new(1, 1, 1);
        img.data[0] = f32::NAN;
        assert!(write_float_image(&img, &path).is_err());
        assert!(!path.exists() || std::fs::metadata(&path).unwrap().len() == 0);
    }

    #[test]
    fn big_endian_files_are_readable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend(1.5f32.to_be_bytes());
        std::fs::write(&path, bytes).unwrap();
        let img = read_float_image(&path).unwrap();
        assert_eq!(img.data, vec![1.5]);
    }
}
