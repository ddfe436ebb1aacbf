//! Binary reflectance-table container.
//!
//! Layout: magic `PBDF`, version u16 = 1, grid dims as 4×u32
//! (θ_h, θ_d, φ_d, λ), band centers as f32 × n_lambda, then the payload of
//! little-endian f32 Mueller entries in (θ_h, θ_d, φ_d, λ, row, col) order.

use crate::error::{Error, Result};
use crate::pbrdf::PBRDFTable;
use crate::polarimetry::Mueller;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"PBDF";
const VERSION: u16 = 1;

pub fn write_pbdf(t: &PBRDFTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(VERSION).map_err(io)?;
    for dim in [t.n_theta_h, t.n_theta_d, t.n_phi_d, t.n_lambda()] {
        w.write_u32::<LittleEndian>(dim as u32).map_err(io)?;
    }
    for &b in &t.band_centers_nm {
        w.write_f32::<LittleEndian>(b).map_err(io)?;
    }
    for cell in t.cells() {
        for row in &cell.m {
            for &v in row {
                w.write_f32::<LittleEndian>(v as f32).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn read_pbdf(path: &Path) -> Result<PBRDFTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::format("PBDF", "file shorter than header"))?;
    if &magic != MAGIC {
        return Err(Error::format("PBDF", format!("bad magic {magic:?}")));
    }
    let version = r
        .read_u16::<LittleEndian>()
        .map_err(|_| Error::format("PBDF", "truncated version"))?;
    if version != VERSION {
        return Err(Error::format("PBDF", format!("unrecognized version {version}")));
    }
    let mut dims = [0usize; 4];
    for d in dims.iter_mut() {
        *d = r
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::format("PBDF", "truncated dims"))? as usize;
    }
    let [nh, nd, np, nl] = dims;
    if nh < 2 || nd < 2 || np < 2 || nl == 0 || nh * nd * np * nl > 1 << 28 {
        return Err(Error::format("PBDF", format!("implausible dims {dims:?}")));
    }
    let mut bands = vec![0.0f32; nl];
    for b in bands.iter_mut() {
        *b = r
            .read_f32::<LittleEndian>()
            .map_err(|_| Error::format("PBDF", "truncated band centers"))?;
    }
    let n_cells = nh * nd * np * nl;
    let mut cells = Vec::with_capacity(n_cells);
    let mut buf = vec![0u8; 64];
    for _ in 0..n_cells {
        r.read_exact(&mut buf)
            .map_err(|_| Error::format("PBDF", "payload shorter than dims declare"))?;
        let mut m = [[0.0f64; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let off = (i * 4 + j) * 4;
                m[i][j] = f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()) as f64;
            }
        }
        cells.push(Mueller::from_rows(m));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format("PBDF", "payload longer than dims declare"));
    }
    PBRDFTable::from_cells(nh, nd, np, bands, cells)
}
