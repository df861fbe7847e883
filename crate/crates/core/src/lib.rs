//! Polarimetric multi-view inverse rendering.
//!
//! Refines a triangle mesh against multi-view RGB, angle-of-polarization and
//! degree-of-polarization images by jointly optimizing vertex positions,
//! per-vertex albedo and per-image spherical-harmonics illumination.
//!
//! The crate is `no_std` (it needs `alloc`); all transcendental math goes
//! through `libm` so results are bit-reproducible across platforms and
//! feature sets. File formats, logging setup and the command line live in
//! the companion `pmvir` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod cost;
pub mod error;
pub mod eval;
pub mod geom;
pub mod image;
pub mod mesh;
pub mod optimizer;
mod par;
pub mod polarimetry;
pub mod shading;
pub mod synth;

pub use error::{Error, Result};
pub use geom::{Mat3, Vec3};
