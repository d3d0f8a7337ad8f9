//! Finite-difference cases for every differentiable operation.

use fert_core::nn::*;
use rand::Rng;

use super::*;

pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const TOL: f64 = 1e-3;
pub const LOSS_TOL: f64 = 1e-6;

pub fn conv2d_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let mut conv = Conv2d::<f64>::new(2, 3, 3, 1, 1, &mut rng).unwrap();
    conv.bias.value.data_mut().iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
    let x = randn(&[1, 2, 5, 5], &mut rng);
    let e1 = check_module(&mut conv, &x, Mode::Train, &mut rng);

    let mut strided = Conv2d::<f64>::new(2, 2, 3, 2, 1, &mut rng).unwrap();
    let x = randn(&[2, 2, 6, 5], &mut rng);
    let e2 = check_module(&mut strided, &x, Mode::Train, &mut rng);

    let mut pointwise = Conv2d::<f64>::new(3, 2, 1, 2, 0, &mut rng).unwrap();
    let x = randn(&[2, 3, 4, 4], &mut rng);
    let e3 = check_module(&mut pointwise, &x, Mode::Train, &mut rng);
    vec![("conv2d 3x3", e1), ("conv2d stride 2", e2), ("conv2d 1x1", e3)]
}

pub fn batchnorm_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let mut bn = BatchNorm2d::<f64>::new(3);
    bn.gamma.value.data_mut().copy_from_slice(&[0.5, 1.5, -0.7]);
    bn.beta.value.data_mut().copy_from_slice(&[0.1, -0.3, 0.2]);
    let x = randn(&[2, 3, 3, 4], &mut rng);
    let train = check_module(&mut bn, &x, Mode::Train, &mut rng);
    bn.running_var.data_mut().copy_from_slice(&[0.5, 2.0, 1.3]);
    let eval = check_module(&mut bn, &x, Mode::Eval, &mut rng);
    vec![("batchnorm train", train), ("batchnorm eval", eval)]
}

pub fn pointwise_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let x = randn(&[2, 3, 4, 6], &mut rng);
    let relu = check_module(&mut Relu::new(), &x, Mode::Train, &mut rng);
    let pool = check_module(&mut MaxPool2x2::new(), &x, Mode::Train, &mut rng);
    let gap = check_module(&mut GlobalAvgPool::new(), &x, Mode::Train, &mut rng);
    let mut lin = Linear::<f64>::new(5, 4, &mut rng).unwrap();
    lin.bias.value.data_mut().copy_from_slice(&[0.1, 0.2, -0.3, 0.0]);
    let x = randn(&[3, 5], &mut rng);
    let linear = check_module(&mut lin, &x, Mode::Train, &mut rng);
    vec![("relu", relu), ("maxpool", pool), ("global avg pool", gap), ("linear", linear)]
}

pub fn block_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seeded(seed);
    let mut identity = BasicBlock::<f64>::new(3, 3, 1, &mut rng).unwrap();
    let x = randn(&[2, 3, 4, 4], &mut rng);
    let e1 = check_module(&mut identity, &x, Mode::Train, &mut rng);
    let mut projected = BasicBlock::<f64>::new(2, 4, 2, &mut rng).unwrap();
    let x = randn(&[2, 2, 6, 6], &mut rng);
    let e2 = check_module(&mut projected, &x, Mode::Train, &mut rng);
    vec![("block identity", e1), ("block projection", e2)]
}

pub fn cross_entropy_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let logits = randn(&[5, 4], &mut rng);
    let labels: Vec<usize> = (0..5).map(|_| rng.random_range(0..4)).collect();
    let (_, grad) = cross_entropy(&logits, &labels).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..logits.numel() {
        let mut p = logits.clone();
        p.data_mut()[i] += FD_STEP;
        let lp = cross_entropy(&p, &labels).unwrap().0;
        p.data_mut()[i] -= 2.0 * FD_STEP;
        let lm = cross_entropy(&p, &labels).unwrap().0;
        worst = worst.max(rel_err(grad.data()[i], (lp - lm) / (2.0 * FD_STEP)));
    }
    worst
}

pub fn reduced_config() -> FertConfig {
    FertConfig {
        image_size: 8,
        extractor_channels: vec![2, 3, 3],
        intermediate_channels: vec![4, 4],
        stages: vec![
            StageSpec {
                blocks: 1,
                channels: 8,
                stride: 1,
            },
            StageSpec {
                blocks: 1,
                channels: 6,
                stride: 2,
            },
        ],
    }
}

/// Central difference at two step sizes, keeping the closer one. Thirteen ReLU
/// and max-pool stages sit between input and loss, so a 1e-5 probe can step
/// across a kink, while 1e-6 alone loses tiny gradients to rounding.
fn net_fd(analytic: f64, mut loss_at: impl FnMut(f64) -> f64) -> f64 {
    [FD_STEP, FD_STEP / 10.0]
        .iter()
        .map(|&h| rel_err(analytic, (loss_at(h) - loss_at(-h)) / (2.0 * h)))
        .fold(f64::INFINITY, f64::min)
}

pub fn fert_net_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let mut net = FertNet::<f64>::new(&reduced_config(), seed).unwrap();
    let mut x: Vec<Tensor<f64>> = (0..4).map(|_| randn(&[2, 1, 8, 8], &mut rng)).collect();
    let labels = [seed as usize % 4, (seed as usize + 1) % 4];
    let loss = |net: &mut FertNet<f64>, x: &[Tensor<f64>]| {
        let logits = net.forward([&x[0], &x[1], &x[2], &x[3]], Mode::Train).unwrap();
        cross_entropy(&logits, &labels).unwrap()
    };
    net.zero_grad();
    let (_, g) = loss(&mut net, &x);
    let dx = net.backward(&g).unwrap();
    let grads = param_grads(&mut net);
    let mut worst: f64 = 0.0;
    for (k, (_, len, g)) in grads.iter().enumerate() {
        for j in probe_indices(*len, 6) {
            let err = net_fd(g[j], |h| {
                nudge(&mut net, k, j, h);
                let l = loss(&mut net, &x).0;
                nudge(&mut net, k, j, -h);
                l
            });
            worst = worst.max(err);
        }
    }
    for b in 0..4 {
        for i in probe_indices(x[b].numel(), 16) {
            let err = net_fd(dx[b].data()[i], |h| {
                let v = x[b].data()[i];
                x[b].data_mut()[i] = v + h;
                let l = loss(&mut net, &x).0;
                x[b].data_mut()[i] = v;
                l
            });
            worst = worst.max(err);
        }
    }
    worst
}

/// Every case at one seed: `(name, error, tolerance)`.
pub fn all_errors(seed: u64) -> Vec<(&'static str, f64, f64)> {
    let mut out: Vec<_> = [conv2d_errors(seed), batchnorm_errors(seed), pointwise_errors(seed), block_errors(seed)]
        .concat()
        .into_iter()
        .map(|(n, e)| (n, e, TOL))
        .collect();
    out.push(("cross entropy", cross_entropy_error(seed), LOSS_TOL));
    out.push(("fert net", fert_net_error(seed), TOL));
    out
}
