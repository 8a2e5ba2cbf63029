//! Simulation and analysis toolkit for Fourier-domain quantum OCT.
//!
//! The pipeline runs `scene` (object transfer function) through an
//! `interferometer` model to a joint spectrum, optionally through the
//! `events` Monte Carlo and the `coincidence` histogrammer, and finally
//! through `reconstruct` to A-scans, roll-off curves and B-scans.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coincidence;
pub mod error;
pub mod events;
pub mod interferometer;
pub mod io;
pub mod reconstruct;
pub mod scene;
pub mod spectral;

pub use error::{Error, Result};
