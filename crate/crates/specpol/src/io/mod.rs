//! File formats and serialization: portable float maps, the binary
//! reflectance-table container, line-oriented manifests, the generator
//! parameter blob, and a minimal PNG writer for 8-bit companions.
//!
//! All multi-byte payloads are little-endian regardless of host, so golden
//! files compare bit-exactly across platforms.

mod blob;
mod manifest;
mod pbdf;
mod pfm;
mod png;

pub use blob::{read_param_blob, write_param_blob, ParamBlob};
pub use manifest::Manifest;
pub use pbdf::{read_pbdf, write_pbdf};
pub use pfm::{read_float_image, write_float_image, FloatImage};
pub use png::{tonemap_srgb, write_png_gray8, write_png_rgb8};

