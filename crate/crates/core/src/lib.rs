//! Effective dimensionality of benchmark score matrices, with null
//! calibration, redundancy and composite analysis, greedy task selection,
//! temporal diagnostics and a synthetic IRT generator.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `parallel` to spread
//! replicate loops over a rayon pool; results are identical either way.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod association;
pub mod composite;
pub mod error;
pub mod matrix;
pub mod null;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod stats;
pub mod synthetic;
pub mod temporal;

mod par;

pub use association::{CorrMatrix, CorrMethod};
pub use error::{Error, Result};
pub use matrix::{BinarizationPolicy, ModelMeta, ScoreKind, ScoreMatrix};
pub use spectral::{CenteringScheme, PcDecomposition, Spectrum};
