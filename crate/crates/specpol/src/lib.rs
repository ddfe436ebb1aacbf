//! Spectro-polarimetric display–camera simulation toolkit.
//!
//! The crate models a desktop rig in which an LCD projects a linearly
//! polarized RGB binary pattern and an RGB polarization camera behind a
//! quarter-wave plate captures the scene in one shot. On top of the
//! Stokes–Mueller core it provides: a sensor simulator, the nine-cue
//! spectro-polarimetric decomposition, tabulated and analytic polarimetric
//! BRDFs, physical-validity certification, a PCA + conditional-generator
//! pipeline that expands a small material set into a large valid one, a
//! forward renderer for the display scene, and a per-pixel nonlinear
//! least-squares inverse fitter recovering normal/albedo/roughness/
//! metallicity maps.

pub mod decompose;
pub mod error;
pub mod exec;
pub mod expansion;
pub mod fitter;
pub mod io;
pub mod math;
pub mod optim;
pub mod pbrdf;
pub mod polarimetry;
pub mod render;
pub mod sensor;
pub mod validity;

pub use error::{Error, Result};
