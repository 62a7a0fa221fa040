//! Linear response of a multimode cavity coupled to a Bose-Einstein
//! condensate through a phase-modulated pump.
//!
//! Frequencies are in units of the recoil energy `E_r`. The crate is layered
//! bottom-up:
//!
//! - [`specfun`]: Bessel, Laguerre and terminating hypergeometric kernels.
//! - [`geometry`]: Laguerre-Gauss modes and cavity-condensate overlaps.
//! - [`medium`]: drive sidebands, mode pairing, density response, polarizability.
//! - [`response`]: Nambu Green's function, spectral function, poles, mode weights.
//! - [`analysis`]: thresholds, phase diagrams, peaks and avoided crossings.
//! - [`config`] and [`cli`]: run files and the command-line front end.

// Range checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod medium;
mod quad;
pub mod response;
pub mod specfun;

pub use error::{Error, Result};
