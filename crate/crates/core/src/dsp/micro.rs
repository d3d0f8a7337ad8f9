use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::doppler_image;
use super::{ComplexMatrix, FftEngine, WindowKind};
use crate::error::{Error, Result};
use crate::radar::{ImageKind, RadarConfig, RadarImage};

/// Number of consecutive frames stacked along slow time.
pub const MICRO_STACK: usize = 8;

/// Ring of the most recent per-rx range spectrograms.
#[derive(Debug, Clone, Default)]
pub struct MicroBuffer {
    frames: VecDeque<Vec<ComplexMatrix>>,
}

impl MicroBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, profiles: Vec<ComplexMatrix>) {
        if self.frames.len() == MICRO_STACK {
            self.frames.pop_front();
        }
        self.frames.push_back(profiles);
    }

    pub fn occupancy(&self) -> usize {
        self.frames.len()
    }

    pub fn is_full(&self) -> bool {
        self.frames.len() == MICRO_STACK
    }

    pub fn clear(&mut self) {
        self.frames.clear();
    }
}

/// Hamming-windowed sinc low-pass, applied as a centred (zero-phase) FIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SincFilter {
    pub taps: usize,
    /// Cutoff as a fraction of the slow-time Nyquist frequency.
    pub cutoff: f64,
}

impl Default for SincFilter {
    fn default() -> Self {
        SincFilter {
            taps: 31,
            cutoff: 0.25,
        }
    }
}

impl SincFilter {
    /// Unit-DC-gain kernel coefficients.
    pub fn kernel(&self) -> Result<Vec<f64>> {
        if self.taps == 0 || self.taps % 2 == 0 {
            return Err(Error::Config(format!("sinc taps must be odd, got {}", self.taps)));
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(Error::Config(format!("sinc cutoff {} outside (0, 1]", self.cutoff)));
        }
        let m = (self.taps - 1) / 2;
        let fc = 0.5 * self.cutoff;
        let mut h: Vec<f64> = (0..self.taps)
            .map(|i| {
                let x = i as f64 - m as f64;
                let sinc = if x == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * x).sin() / (PI * x)
                };
                let hamming = if self.taps == 1 {
                    1.0
                } else {
                    0.54 - 0.46 * (2.0 * PI * i as f64 / (self.taps - 1) as f64).cos()
                };
                sinc * hamming
            })
            .collect();
        let sum: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= sum);
        Ok(h)
    }
}

#[derive(Debug, Clone)]
pub struct MicroOutput {
    pub image: RadarImage,
    /// Filtered central slow-time block per rx, `[n_chirps][n_range_bins]`.
    pub block: Vec<ComplexMatrix>,
}

/// Builds the micro range-Doppler image from a full stack of 8 frames.
///
/// The stacked spectrogram has its slow-time mean (per range bin) and then
/// its range mean (per chirp) removed, is low-pass filtered along slow time,
/// and the central `n_chirps` samples are Doppler transformed. Returns
/// `Ok(None)` while the buffer is still filling.
pub fn micro_rdi(
    buffer: &MicroBuffer,
    kernel: &[f64],
    cfg: &RadarConfig,
    engine: &FftEngine,
) -> Result<Option<MicroOutput>> {
    if !buffer.is_full() {
        return Ok(None);
    }
    let n_rx = buffer.frames[0].len();
    let (chirps, bins) = (cfg.n_chirps, cfg.n_range_bins());
    for frame in &buffer.frames {
        if frame.len() != n_rx {
            return Err(Error::shape("micro_rdi", n_rx, frame.len()));
        }
        for p in frame {
            if (p.rows, p.cols) != (chirps, bins) {
                return Err(Error::shape("micro_rdi", (chirps, bins), (p.rows, p.cols)));
            }
        }
    }
    let total = chirps * MICRO_STACK;
    let start = (total - chirps) / 2;
    let half = kernel.len() / 2;

    let block: Vec<ComplexMatrix> = (0..n_rx)
        .map(|rx| {
            let mut stacked = ComplexMatrix::zeros(total, bins);
            for (f, frame) in buffer.frames.iter().enumerate() {
                stacked.data[f * chirps * bins..(f + 1) * chirps * bins].copy_from_slice(&frame[rx].data);
            }
            // Slow-time mean per range bin.
            let mut col_mean = vec![Complex64::new(0.0, 0.0); bins];
            for row in stacked.data.chunks_exact(bins) {
                for (m, v) in col_mean.iter_mut().zip(row) {
                    *m += *v;
                }
            }
            col_mean.iter_mut().for_each(|m| *m /= total as f64);
            // Then the range mean per chirp.
            for row in stacked.data.chunks_exact_mut(bins) {
                for (v, m) in row.iter_mut().zip(&col_mean) {
                    *v -= *m;
                }
                let row_mean = row.iter().sum::<Complex64>() / bins as f64;
                row.iter_mut().for_each(|v| *v -= row_mean);
            }
            // Centred FIR, evaluated only where the Doppler FFT looks.
            let mut out = ComplexMatrix::zeros(chirps, bins);
            for t in 0..chirps {
                let centre = start + t;
                for (j, &h) in kernel.iter().enumerate() {
                    let src = centre as isize + j as isize - half as isize;
                    if src < 0 || src >= total as isize {
                        continue;
                    }
                    let row = stacked.row(src as usize);
                    let dst = &mut out.data[t * bins..(t + 1) * bins];
                    for (d, s) in dst.iter_mut().zip(row) {
                        *d += *s * h;
                    }
                }
            }
            out
        })
        .collect();

    let image = doppler_image(ImageKind::MicroRdi, &block, cfg, engine, WindowKind::Hann)?;
    Ok(Some(MicroOutput { image, block }))
}
