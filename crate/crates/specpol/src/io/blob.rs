//! Flat little-endian f32 parameter blob with a shape-descriptor header.
//!
//! Layout: magic `WGEN`, version u16 = 1, tensor count u32, then per
//! tensor a rank u32 and `rank` u32 dims, then every tensor's payload
//! concatenated as little-endian f32.

use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"WGEN";
const VERSION: u16 = 1;

/// A named-by-position collection of shaped f64 tensors. Values round-trip
/// through f32 storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamBlob {
    pub tensors: Vec<(Vec<usize>, Vec<f64>)>,
}

impl ParamBlob {
    pub fn push(&mut self, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/payload mismatch");
        self.tensors.push((shape, data));
    }
}

pub fn write_param_blob(blob: &ParamBlob, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_u16::<LittleEndian>(VERSION).map_err(io)?;
    w.write_u32::<LittleEndian>(blob.tensors.len() as u32).map_err(io)?;
    for (shape, data) in &blob.tensors {
        w.write_u32::<LittleEndian>(shape.len() as u32).map_err(io)?;
        for &d in shape {
            w.write_u32::<LittleEndian>(d as u32).map_err(io)?;
        }
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
    }
    for (_, data) in &blob.tensors {
        for &v in data {
            w.write_f32::<LittleEndian>(v as f32).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_param_blob(path: &Path) -> Result<ParamBlob> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::format("WGEN", "short header"))?;
    if &magic != MAGIC {
        return Err(Error::format("WGEN", format!("bad magic {magic:?}")));
    }
    let version = r.read_u16::<LittleEndian>().map_err(|_| Error::format("WGEN", "short header"))?;
    if version != VERSION {
        return Err(Error::format("WGEN", format!("unrecognized version {version}")));
    }
    let count = r.read_u32::<LittleEndian>().map_err(|_| Error::format("WGEN", "short header"))? as usize;
    if count > 1 << 20 {
        return Err(Error::format("WGEN", "implausible tensor count"));
    }
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = r.read_u32::<LittleEndian>().map_err(|_| Error::format("WGEN", "short shape"))? as usize;
        if rank > 8 {
            return Err(Error::format("WGEN", "implausible tensor rank"));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.read_u32::<LittleEndian>().map_err(|_| Error::format("WGEN", "short shape"))? as usize);
        }
        if shape.iter().product::<usize>() > 1 << 28 {
            return Err(Error::format("WGEN", "implausible tensor size"));
        }
        shapes.push(shape);
    }
    let mut blob = ParamBlob::default();
    for shape in shapes {
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(
                r.read_f32::<LittleEndian>()
                    .map_err(|_| Error::format("WGEN", "payload shorter than shapes declare"))?
                    as f64,
            );
        }
        blob.tensors.push((shape, data));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format("WGEN", "payload longer than shapes declare"));
    }
    Ok(blob)
}
