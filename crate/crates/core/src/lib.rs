//! Facial-expression recognition from a short-range 60 GHz FMCW radar.
//!
//! The crate covers the whole chain: a point-scatterer scene simulator,
//! range-Doppler / micro-Doppler / angle image formation with temporal
//! averaging, a small dense-tensor CNN engine with a four-branch fused
//! classifier, and the training, evaluation and streaming harness.

pub mod cli;
pub mod dsp;
pub mod error;
pub mod io;
pub mod label;
pub mod nn;
pub mod radar;
pub mod sim;
pub mod train;

pub use error::{Error, FormatError, Result};
pub use label::ClassLabel;
pub use radar::{derive_params, range_bin_of, AdcCube, DerivedParams, RadarConfig, RadarImage};
