//! Signal-chain checks against brute-force oracles and simulator ground truth.

mod common;

use std::f64::consts::PI;

use common::dft_oracle::{self, random_cube};
use common::*;
use fert_core::dsp::*;
use fert_core::radar::{AdcCube, ImageKind, RadarConfig, RadarImage};
use fert_core::sim::{simulate_scene, synth_frame, Scatterer};
use fert_core::{derive_params, ClassLabel};
use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;

#[test]
fn range_fft_matches_direct_dft() {
    for n in [64, 128] {
        let err = dft_oracle::range_fft_error(n, 20, 1);
        assert!(err < 1e-5, "N = {n}: {err:e}");
    }
}

#[test]
fn doppler_matches_direct_dft() {
    for n in [64, 128] {
        let err = dft_oracle::doppler_error(n, 20, 1);
        assert!(err < 1e-5, "N = {n}: {err:e}");
    }
}

#[test]
fn range_fft_is_linear() {
    let cfg = RadarConfig::default();
    let engine = FftEngine::for_config(&cfg);
    let mut rng = seeded(9);
    let x = random_cube(&cfg, &mut rng);
    let y = random_cube(&cfg, &mut rng);
    let mut sum = x.clone();
    for (s, (&a, &b)) in sum.data.iter_mut().zip(x.data.iter().zip(&y.data)) {
        *s = -2.0 * a + b;
    }
    let fx = range_fft(&x, &engine, WindowKind::Hann);
    let fy = range_fft(&y, &engine, WindowKind::Hann);
    let fs = range_fft(&sum, &engine, WindowKind::Hann);
    for rx in 0..cfg.n_rx {
        for ((p, q), r) in fx[rx].data.iter().zip(&fy[rx].data).zip(&fs[rx].data) {
            assert!((p * -2.0 + q - r).norm() <= 1e-4 * (1.0 + r.norm()));
        }
    }
}

fn rdi_without_mti(cfg: &RadarConfig, cube: &AdcCube) -> RadarImage {
    let engine = FftEngine::for_config(cfg);
    doppler_fft(&range_fft(cube, &engine, WindowKind::Hann), cfg, &engine, WindowKind::Hann).unwrap()
}

#[test]
fn drift_velocity_maps_to_doppler_offset() {
    let cfg = RadarConfig::default();
    let res = derive_params(&cfg).unwrap().velocity_resolution;
    for k in [-5i32, 5] {
        let s = Scatterer {
            drift_velocity: k as f64 * res,
            ..Scatterer::fixed(0.6, 0.0, 0.0)
        };
        let cube = synth_frame(&cfg, &[s], 0.0, 0.0, 0, &mut seeded(1)).unwrap();
        let (_, col) = rdi_without_mti(&cfg, &cube).argmax();
        let offset = col as i32 - cfg.n_chirps as i32 / 2;
        assert!((offset - k).abs() <= 1, "velocity {k} bins: peak offset {offset}");
    }
}

fn micro_energy(cfg: &RadarConfig, scatterer: Scatterer, bin: usize) -> f64 {
    let engine = FftEngine::for_config(cfg);
    let kernel = SincFilter::default().kernel().unwrap();
    let rec = simulate_scene(cfg, &[scatterer], None, 0.05, MICRO_STACK, 0, &mut seeded(77)).unwrap();
    let mut buf = MicroBuffer::new();
    for f in &rec.frames {
        buf.push(range_fft(f, &engine, WindowKind::Hann));
    }
    let out = micro_rdi(&buf, &kernel, cfg, &engine).unwrap().unwrap();
    out.image.row_energy(bin)
}

#[test]
fn vibration_dominates_micro_rdi() {
    let cfg = RadarConfig::default();
    let still = Scatterer::fixed(0.25, 0.0, 0.0);
    let vib = Scatterer {
        vibration_amp: 1e-3,
        vibration_freq: 6.0,
        ..still
    };
    let bin = 2;
    let db = 10.0 * (micro_energy(&cfg, vib, bin) / micro_energy(&cfg, still, bin)).log10();
    assert!(db >= 20.0, "micro-RDI gain {db:.1} dB");
}

/// `a^H R^-1 a` through a general 2x2 inverse.
fn capon_oracle(snaps: &[[Complex64; 2]], ratio: f64, loading: f64, deg: f64) -> f64 {
    let k = snaps.len() as f64;
    let mut r = Matrix2::<Complex64>::zeros();
    for s in snaps {
        let x = Vector2::new(s[0], s[1]);
        r += x * x.adjoint();
    }
    r /= Complex64::new(k, 0.0);
    let load = loading * r.trace().re / 2.0;
    r += Matrix2::identity() * Complex64::new(load, 0.0);
    let inv = r.try_inverse().unwrap();
    let psi = 2.0 * PI * ratio * deg.to_radians().sin();
    let a = Vector2::new(Complex64::new(1.0, 0.0), Complex64::from_polar(1.0, -psi));
    1.0 / (a.adjoint() * inv * a)[(0, 0)].re
}

#[test]
fn capon_matches_matrix_inverse_oracle() {
    let grid = AngleGrid::default();
    for seed in 0..10 {
        let mut rng = seeded(seed);
        let snaps = noisy_source(rng.random_range(-50.0..50.0), 10.0, 64, &mut rng);
        let spec = capon_spectrum(&snaps, &grid, 0.5, DEFAULT_LOADING).unwrap();
        for (i, &p) in spec.power.iter().enumerate() {
            let want = capon_oracle(&snaps, 0.5, DEFAULT_LOADING, grid.center(i));
            assert!((p - want).abs() <= 1e-9 * want, "bin {i}: {p} vs {want}");
        }
    }
}

fn single_window(cfg: &RadarConfig, scene: &[Scatterer], n_frames: usize, seed: u64) -> Vec<FeatureWindow> {
    let rec = simulate_scene(cfg, scene, None, 0.05, n_frames, seed, &mut seeded(seed)).unwrap();
    process_stream(&rec, cfg, &PipelineConfig::with_window(1)).unwrap()
}

#[test]
fn scatterer_angle_recovered_in_rai_and_rei() {
    let cfg = RadarConfig::default();
    let grid = AngleGrid::default();
    let s = Scatterer {
        vibration_amp: 1e-3,
        vibration_freq: 6.0,
        ..Scatterer::fixed(0.25, 10.0, 0.0)
    };
    let windows = single_window(&cfg, &[s], 12, 5);
    let w = windows.last().unwrap();
    let (bin, _) = w.micro_rdi.argmax();
    let arg = |img: &RadarImage| (0..img.cols).fold(0, |b, c| if img.at(bin, c) > img.at(bin, b) { c } else { b });
    let az = arg(&w.rai) as i64;
    let el = arg(&w.rei) as i64;
    assert!((az - grid.bin_of(10.0) as i64).abs() <= 1, "azimuth bin {az}");
    assert!((el - grid.bin_of(0.0) as i64).abs() <= 1, "elevation bin {el}");
    assert_eq!((w.rai.kind, w.rei.kind), (ImageKind::Rai, ImageKind::Rei));
}

#[test]
fn noise_only_angle_images_have_no_outliers() {
    let cfg = RadarConfig::default();
    for seed in 0..3 {
        let w = single_window(&cfg, &[], 10, seed);
        for img in [&w[0].rai, &w[0].rei] {
            let mut v = img.data.clone();
            v.sort_by(f32::total_cmp);
            let median = v[v.len() / 2];
            assert!(img.max() <= 3.0 * median, "seed {seed}: max {} vs median {median}", img.max());
        }
    }
}

#[test]
fn emission_latency() {
    let cfg = RadarConfig::default();
    let s = [Scatterer::fixed(0.25, 0.0, 0.0)];
    let rec = simulate_scene(&cfg, &s, Some(ClassLabel::Neutral), 0.05, 208, 1, &mut seeded(1)).unwrap();
    let pcfg = PipelineConfig::default();
    assert_eq!(pcfg.latency_frames(), 208);
    let mut short = rec.clone();
    short.frames.truncate(207);
    assert!(process_stream(&short, &cfg, &pcfg).unwrap().is_empty());
    let out = process_stream(&rec, &cfg, &pcfg).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].frame_index, 207);
    assert_eq!(out[0].window_len, 200);

    let quick = single_window(&cfg, &s, 9, 1);
    assert_eq!(quick.len(), 1);
    assert_eq!(quick[0].frame_index, 8);
}

#[test]
fn stream_is_deterministic_and_normalized() {
    let cfg = RadarConfig::default();
    let s = [Scatterer {
        vibration_amp: 5e-4,
        vibration_freq: 3.0,
        ..Scatterer::fixed(0.3, -12.0, 8.0)
    }];
    let a = single_window(&cfg, &s, 14, 21);
    let b = single_window(&cfg, &s, 14, 21);
    assert_eq!(a, b);
    for w in &a {
        for img in w.images() {
            assert!(img.data.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert_eq!(img.max(), 1.0);
        }
    }
}

#[test]
fn e_respd_preserves_argmax() {
    let cfg = RadarConfig::default();
    let rec = simulate_scene(&cfg, &[Scatterer::fixed(1.0, 0.0, 0.0)], None, 0.3, 6, 4, &mut seeded(4)).unwrap();
    let engine = FftEngine::for_config(&cfg);
    let imgs: Vec<RadarImage> = rec.frames.iter().map(|f| rdi_without_mti(&cfg, f)).collect();
    let out = e_respd(&imgs, 5).unwrap().unwrap();
    let mut mean = vec![0.0f64; out.data.len()];
    for img in &imgs[1..] {
        for (m, &v) in mean.iter_mut().zip(&img.data) {
            *m += v as f64;
        }
    }
    let best = (0..mean.len()).fold(0, |b, i| if mean[i] > mean[b] { i } else { b });
    let (r, c) = out.argmax();
    assert_eq!(r * out.cols + c, best);
    let _ = engine;
}
