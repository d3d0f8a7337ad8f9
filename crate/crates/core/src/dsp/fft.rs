use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::radar::{AdcCube, Axis, ImageKind, RadarConfig, RadarImage};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum WindowKind {
    #[default]
    Hann,
    /// No tapering; used when comparing against a plain DFT.
    Rectangular,
}

impl WindowKind {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

/// Pre-planned forward FFTs for a fixed set of lengths.
#[derive(Clone)]
pub struct FftEngine {
    plans: BTreeMap<usize, Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftEngine")
            .field("sizes", &self.plans.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl FftEngine {
    pub fn with_sizes(sizes: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        let plans = sizes
            .iter()
            .map(|&n| (n, planner.plan_fft_forward(n)))
            .collect();
        FftEngine { plans }
    }

    pub fn for_config(cfg: &RadarConfig) -> Self {
        Self::with_sizes(&[cfg.n_samples, cfg.n_chirps])
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        let plan = self
            .plans
            .get(&buf.len())
            .unwrap_or_else(|| panic!("no FFT plan for length {}", buf.len()));
        plan.process(buf);
    }
}

/// Range FFT per rx: remove the fast-time mean of each chirp, taper, FFT and
/// keep the first `n_samples / 2` bins. Output is `[n_chirps][n_range_bins]` per rx.
pub fn range_fft(cube: &AdcCube, engine: &FftEngine, window: WindowKind) -> Vec<ComplexMatrix> {
    let n = cube.n_samples;
    let bins = n / 2;
    let w = window.coefficients(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    (0..cube.n_rx)
        .map(|rx| {
            let mut out = ComplexMatrix::zeros(cube.n_chirps, bins);
            for c in 0..cube.n_chirps {
                let x = cube.chirp(rx, c);
                let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
                for ((b, &v), &wi) in buf.iter_mut().zip(x).zip(&w) {
                    *b = Complex64::new((v as f64 - mean) * wi, 0.0);
                }
                engine.forward(&mut buf);
                out.data[c * bins..(c + 1) * bins].copy_from_slice(&buf[..bins]);
            }
            out
        })
        .collect()
}

/// Slow-time FFT magnitudes of one channel, `[range_bin][doppler_bin]`, with the
/// zero-velocity bin moved to index `n_chirps / 2`.
pub fn doppler_magnitudes(profile: &ComplexMatrix, engine: &FftEngine, window: WindowKind) -> Vec<f64> {
    let (n, bins) = (profile.rows, profile.cols);
    let w = window.coefficients(n);
    let half = n / 2;
    let mut out = vec![0.0; bins * n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..bins {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = profile.at(c, r) * w[c];
        }
        engine.forward(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            out[r * n + (k + half) % n] = z.norm();
        }
    }
    out
}

/// Range-Doppler image: per-rx Doppler magnitudes averaged over channels.
pub fn doppler_fft(
    profiles: &[ComplexMatrix],
    cfg: &RadarConfig,
    engine: &FftEngine,
    window: WindowKind,
) -> Result<RadarImage> {
    doppler_image(ImageKind::Rdi, profiles, cfg, engine, window)
}

pub(crate) fn doppler_image(
    kind: ImageKind,
    profiles: &[ComplexMatrix],
    cfg: &RadarConfig,
    engine: &FftEngine,
    window: WindowKind,
) -> Result<RadarImage> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::shape("doppler_fft", "at least one rx", 0))?;
    let expected = (cfg.n_chirps, cfg.n_range_bins());
    for p in profiles {
        if (p.rows, p.cols) != expected {
            return Err(Error::shape("doppler_fft", expected, (p.rows, p.cols)));
        }
    }
    let mut acc = vec![0.0f64; first.rows * first.cols];
    for p in profiles {
        for (a, m) in acc.iter_mut().zip(doppler_magnitudes(p, engine, window)) {
            *a += m;
        }
    }
    let scale = 1.0 / profiles.len() as f64;
    RadarImage::new(
        kind,
        Axis::range(cfg),
        Axis::doppler(cfg),
        acc.into_iter().map(|v| (v * scale) as f32).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from_fn(cfg: &RadarConfig, f: impl Fn(usize, usize, usize) -> f32) -> AdcCube {
        let mut cube = AdcCube::zeros(cfg, 0);
        for rx in 0..cfg.n_rx {
            for c in 0..cfg.n_chirps {
                for (n, v) in cube.chirp_mut(rx, c).iter_mut().enumerate() {
                    *v = f(rx, c, n);
                }
            }
        }
        cube
    }

    #[test]
    fn zero_and_dc_inputs_give_zero_spectra() {
        let cfg = RadarConfig::default();
        let engine = FftEngine::for_config(&cfg);
        for value in [0.0f32, 3.5] {
            let cube = cube_from_fn(&cfg, |_, _, _| value);
            for m in range_fft(&cube, &engine, WindowKind::Hann) {
                assert!(m.data.iter().all(|z| z.norm() < 1e-9));
            }
        }
    }

    #[test]
    fn bin_three_cosine_peaks_at_three() {
        let cfg = RadarConfig::default();
        let engine = FftEngine::for_config(&cfg);
        let n = cfg.n_samples as f64;
        let cube = cube_from_fn(&cfg, |_, _, i| (2.0 * PI * 3.0 * i as f64 / n).cos() as f32);
        for window in [WindowKind::Rectangular, WindowKind::Hann] {
            let out = range_fft(&cube, &engine, window);
            let row = out[1].row(5);
            let peak = (0..row.len()).max_by(|&a, &b| row[a].norm().total_cmp(&row[b].norm())).unwrap();
            assert_eq!(peak, 3);
        }
    }

    #[test]
    fn static_target_sits_at_center_doppler() {
        let cfg = RadarConfig::default();
        let engine = FftEngine::for_config(&cfg);
        let n = cfg.n_samples as f64;
        let cube = cube_from_fn(&cfg, |_, _, i| (2.0 * PI * 7.0 * i as f64 / n + 0.3).cos() as f32);
        let profiles = range_fft(&cube, &engine, WindowKind::Hann);
        let rdi = doppler_fft(&profiles, &cfg, &engine, WindowKind::Hann).unwrap();
        assert_eq!(rdi.argmax(), (7, cfg.n_chirps / 2));
    }

    #[test]
    fn doppler_rejects_wrong_shapes() {
        let cfg = RadarConfig::default();
        let engine = FftEngine::for_config(&cfg);
        let bad = vec![ComplexMatrix::zeros(32, 64)];
        assert!(matches!(
            doppler_fft(&bad, &cfg, &engine, WindowKind::Hann),
            Err(Error::Shape { .. })
        ));
        assert!(doppler_fft(&[], &cfg, &engine, WindowKind::Hann).is_err());
    }
}
