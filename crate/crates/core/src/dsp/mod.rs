//! Radar image formation: range and Doppler FFTs, clutter removal, the
//! stacked micro-Doppler image, two-element Capon angle spectra and the
//! sliding temporal averaging applied before classification.

mod capon;
mod fft;
mod micro;
mod mti;
mod pipeline;
mod respd;

pub use capon::{capon_spectrum, rai_rei, AngleGrid, CaponSpectrum, DEFAULT_LOADING};
pub use fft::{doppler_fft, doppler_magnitudes, range_fft, ComplexMatrix, FftEngine, WindowKind};
pub use micro::{micro_rdi, MicroBuffer, MicroOutput, SincFilter, MICRO_STACK};
pub use mti::MtiState;
pub use pipeline::{process_stream, FeatureWindow, Pipeline, PipelineConfig};
pub use respd::{e_respd, ERespd};
