//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod dft_oracle;
pub mod formats;
pub mod grad;

use std::f64::consts::PI;

use fert_core::nn::{Mode, Module, Param, ParamFn, Parameterized, Scalar, Tensor, Visitor, ZeroGrad};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Direct O(N^2) DFT.
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * ((k * i) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

pub fn max_rel_err(got: &[Complex64], want: &[Complex64]) -> f64 {
    let scale = want.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    got.iter().zip(want).map(|(a, b)| (a - b).norm() / scale).fold(0.0, f64::max)
}

pub const FD_STEP: f64 = 1e-5;

/// Relative error with the denominator floored at 1e-6 so gradients that are
/// exactly zero analytically are compared absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn randn(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

struct AsParams<'a, M>(&'a mut M);

impl<M: Module<f64>> Parameterized<f64> for AsParams<'_, M> {
    fn visit_params(&mut self, v: &mut dyn Visitor<f64>) {
        self.0.visit("", v)
    }
}

/// Adds `delta` to entry `j` of the `k`-th parameter in visit order.
pub fn nudge(model: &mut dyn Parameterized<f64>, k: usize, j: usize, delta: f64) {
    let mut i = 0;
    model.visit_params(&mut ParamFn(|_: &str, p: &mut Param<f64>| {
        if i == k {
            p.value.data_mut()[j] += delta;
        }
        i += 1;
    }));
}

/// `(name, value count, gradient)` of every parameter in visit order.
pub fn param_grads(model: &mut dyn Parameterized<f64>) -> Vec<(String, usize, Vec<f64>)> {
    let mut out = Vec::new();
    model.visit_params(&mut ParamFn(|name: &str, p: &mut Param<f64>| {
        out.push((name.to_owned(), p.value.numel(), p.grad.data().to_vec()))
    }));
    out
}

/// Entries probed per tensor: all of them when small, otherwise an even stride.
pub fn probe_indices(len: usize, max: usize) -> Vec<usize> {
    if len <= max {
        (0..len).collect()
    } else {
        (0..max).map(|i| i * len / max).collect()
    }
}

/// Largest relative error between backprop and central differences of
/// `L = <r, module(x)>` over the input and every parameter.
pub fn check_module<M: Module<f64>>(module: &mut M, x: &Tensor<f64>, mode: Mode, rng: &mut ChaCha8Rng) -> f64 {
    let y = module.forward(x, mode).unwrap();
    let r = randn(y.shape(), rng);
    module.visit("", &mut ZeroGrad);
    let dx = module.backward(&r).unwrap();
    let grads = param_grads(&mut AsParams(module));

    let loss = |m: &mut M, x: &Tensor<f64>| dot(&r, &m.forward(x, mode).unwrap());
    let mut worst: f64 = 0.0;
    for i in probe_indices(x.numel(), 64) {
        let mut xp = x.clone();
        xp.data_mut()[i] += FD_STEP;
        let lp = loss(module, &xp);
        xp.data_mut()[i] -= 2.0 * FD_STEP;
        let lm = loss(module, &xp);
        worst = worst.max(rel_err(dx.data()[i], (lp - lm) / (2.0 * FD_STEP)));
    }
    for (k, (_, len, g)) in grads.iter().enumerate() {
        for j in probe_indices(*len, 32) {
            nudge(&mut AsParams(module), k, j, FD_STEP);
            let lp = loss(module, x);
            nudge(&mut AsParams(module), k, j, -2.0 * FD_STEP);
            let lm = loss(module, x);
            nudge(&mut AsParams(module), k, j, FD_STEP);
            worst = worst.max(rel_err(g[j], (lp - lm) / (2.0 * FD_STEP)));
        }
    }
    worst
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.f64()).collect()
}

/// One unit-power narrowband source at `deg` seen by a half-wavelength pair.
pub fn noisy_source(deg: f64, snr_db: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<[Complex64; 2]> {
    let psi = 2.0 * PI * 0.5 * deg.to_radians().sin();
    let sigma = 10f64.powf(-snr_db / 20.0) / 2f64.sqrt();
    let mut noise = || Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)) * sigma;
    (0..n)
        .map(|i| {
            let s = Complex64::from_polar(1.0, 0.37 * i as f64 * i as f64);
            [s + noise(), s * Complex64::from_polar(1.0, -psi) + noise()]
        })
        .collect()
}
