//! Range and Doppler transforms against the direct DFT.

use std::f64::consts::PI;

use fert_core::dsp::{doppler_fft, range_fft, ComplexMatrix, FftEngine, WindowKind};
use fert_core::radar::{AdcCube, RadarConfig};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;

pub fn config(n_chirps: usize, n_samples: usize) -> RadarConfig {
    RadarConfig {
        n_chirps,
        n_samples,
        ..RadarConfig::default()
    }
}

/// Periodic Hann written out from its definition.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| (PI * i as f64 / n as f64).sin().powi(2)).collect()
}

pub fn random_cube(cfg: &RadarConfig, rng: &mut ChaCha8Rng) -> AdcCube {
    let mut cube = AdcCube::zeros(cfg, 0);
    cube.data.iter_mut().for_each(|v| *v = rng.sample::<f32, _>(StandardNormal) + 0.3);
    cube
}

/// Worst peak-relative error of `range_fft` over `trials` random cubes with
/// `n` samples per chirp.
pub fn range_fft_error(n: usize, trials: usize, seed: u64) -> f64 {
    let cfg = config(2, n);
    let engine = FftEngine::for_config(&cfg);
    let w = hann(n);
    let mut rng = seeded(seed ^ n as u64);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let cube = random_cube(&cfg, &mut rng);
        let got = range_fft(&cube, &engine, WindowKind::Hann);
        for rx in 0..cfg.n_rx {
            for c in 0..cfg.n_chirps {
                let x = cube.chirp(rx, c);
                let mean = x.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
                let input: Vec<Complex64> =
                    x.iter().zip(&w).map(|(&v, &wi)| Complex64::new((v as f64 - mean) * wi, 0.0)).collect();
                worst = worst.max(max_rel_err(got[rx].row(c), &dft(&input)[..n / 2]));
            }
        }
    }
    worst
}

/// Worst peak-relative error of the range-Doppler image over `trials` random
/// slow-time profiles with `n` chirps: per-rx DFT magnitudes, centered, then
/// averaged over the receive channels.
pub fn doppler_error(n: usize, trials: usize, seed: u64) -> f64 {
    let cfg = config(n, 16);
    let bins = cfg.n_range_bins();
    let engine = FftEngine::for_config(&cfg);
    let w = hann(n);
    let mut rng = seeded(seed ^ (n as u64) << 8);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let profiles: Vec<ComplexMatrix> = (0..cfg.n_rx)
            .map(|_| {
                let mut p = ComplexMatrix::zeros(n, bins);
                for z in &mut p.data {
                    *z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                }
                p
            })
            .collect();
        let img = doppler_fft(&profiles, &cfg, &engine, WindowKind::Hann).unwrap();
        for r in 0..bins {
            let mut want = vec![0.0; n];
            for p in &profiles {
                let col: Vec<Complex64> = p.column(r).iter().zip(&w).map(|(z, &wi)| z * wi).collect();
                let spec = dft(&col);
                for (k, v) in want.iter_mut().enumerate() {
                    *v += spec[(k + n / 2) % n].norm() / cfg.n_rx as f64;
                }
            }
            let want: Vec<Complex64> = want.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
            let got: Vec<Complex64> = img.row(r).iter().map(|&v| Complex64::new(v as f64, 0.0)).collect();
            worst = worst.max(max_rel_err(&got, &want));
        }
    }
    worst
}
