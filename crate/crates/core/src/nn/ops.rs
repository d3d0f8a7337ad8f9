use rand_chacha::ChaCha8Rng;

use super::conv::he_uniform;
use super::{gemm, join, Mode, Module, Param, Scalar, Tensor, Visitor};
use crate::error::{Error, Result};

fn missing(op: &str) -> Error {
    Error::Config(format!("{op}: backward before forward"))
}

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }
}

impl<T: Scalar> Module<T> for Relu {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut out = x.clone();
        if !mode.keeps_cache() {
            self.mask = None;
            out.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
            return Ok(out);
        }
        let mask: Vec<bool> = out
            .data_mut()
            .iter_mut()
            .map(|v| {
                let on = *v > T::zero();
                if !on {
                    *v = T::zero();
                }
                on
            })
            .collect();
        self.mask = Some((x.shape().to_vec(), mask));
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, mask) = self.mask.take().ok_or_else(|| missing("relu"))?;
        if grad.shape() != shape {
            return Err(Error::shape("relu backward", shape, grad.shape()));
        }
        let mut dx = grad.clone();
        for (d, &on) in dx.data_mut().iter_mut().zip(&mask) {
            if !on {
                *d = T::zero();
            }
        }
        Ok(dx)
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<T>) {}
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Ties resolve to the first element in row-major window order.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2x2 {
    cache: Option<(Vec<usize>, Vec<u32>)>,
}

impl MaxPool2x2 {
    pub fn new() -> Self {
        MaxPool2x2::default()
    }
}

impl<T: Scalar> Module<T> for MaxPool2x2 {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4("maxpool2x2")?;
        let (ho, wo) = (h / 2, w / 2);
        if ho == 0 || wo == 0 {
            return Err(Error::shape("maxpool2x2", "spatial >= 2x2", x.shape()));
        }
        let mut out = Tensor::zeros(&[n, c, ho, wo]);
        let mut arg = vec![0u32; n * c * ho * wo];
        let xd = x.data();
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if xd[i] > xd[best] {
                            best = i;
                        }
                    }
                    let o = (plane * ho + oy) * wo + ox;
                    out.data_mut()[o] = xd[best];
                    arg[o] = (best - base) as u32;
                }
            }
        }
        self.cache = mode.keeps_cache().then(|| (x.shape().to_vec(), arg));
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let (shape, arg) = self.cache.take().ok_or_else(|| missing("maxpool2x2"))?;
        let (h, w) = (shape[2], shape[3]);
        let per_plane = (h / 2) * (w / 2);
        if grad.numel() != arg.len() {
            return Err(Error::shape("maxpool2x2 backward", arg.len(), grad.shape()));
        }
        let mut dx = Tensor::zeros(&shape);
        for (o, (&g, &a)) in grad.data().iter().zip(&arg).enumerate() {
            let plane = o / per_plane;
            dx.data_mut()[plane * h * w + a as usize] += g;
        }
        Ok(dx)
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<T>) {}
}

/// Mean over the spatial axes: `(N, C, H, W) -> (N, C)`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        GlobalAvgPool::default()
    }
}

impl<T: Scalar> Module<T> for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4("global_avg_pool")?;
        let hw = h * w;
        let scale = T::of(1.0 / hw as f64);
        let data = x.data().chunks(hw).map(|p| p.iter().copied().sum::<T>() * scale).collect();
        self.shape = Some(x.shape().to_vec());
        Tensor::from_vec(&[n, c], data)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let shape = self.shape.take().ok_or_else(|| missing("global_avg_pool"))?;
        let hw = shape[2] * shape[3];
        if grad.shape() != [shape[0], shape[1]] {
            return Err(Error::shape("global_avg_pool backward", &shape[..2], grad.shape()));
        }
        let scale = T::of(1.0 / hw as f64);
        let mut dx = Tensor::zeros(&shape);
        for (p, &g) in dx.data_mut().chunks_mut(hw).zip(grad.data()) {
            p.fill(g * scale);
        }
        Ok(dx)
    }

    fn visit(&mut self, _prefix: &str, _v: &mut dyn Visitor<T>) {}
}

/// Fully connected layer `y = x W^T + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone)]
pub struct Linear<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::Config("linear: feature counts must be >= 1".into()));
        }
        Ok(Linear {
            weight: Param::new(he_uniform(&[out_features, in_features], in_features, rng)),
            bias: Param::new(Tensor::zeros(&[out_features])),
            input: None,
        })
    }

    fn dims(&self) -> (usize, usize) {
        (self.weight.value.shape()[0], self.weight.value.shape()[1])
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, f) = x.dims2("linear")?;
        let (out_f, in_f) = self.dims();
        if f != in_f {
            return Err(Error::shape("linear", [n, in_f], x.shape()));
        }
        let mut y = Tensor::zeros(&[n, out_f]);
        for row in y.data_mut().chunks_mut(out_f) {
            row.copy_from_slice(self.bias.value.data());
        }
        gemm(n, in_f, out_f, T::one(), (x.data(), in_f, 1), (self.weight.value.data(), 1, in_f), T::one(), y.data_mut(), out_f, 1);
        self.input = mode.keeps_cache().then(|| x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| missing("linear"))?;
        let (n, in_f) = x.dims2("linear")?;
        let out_f = self.dims().0;
        if grad.shape() != [n, out_f] {
            return Err(Error::shape("linear backward", [n, out_f], grad.shape()));
        }
        for row in grad.data().chunks(out_f) {
            for (b, &g) in self.bias.grad.data_mut().iter_mut().zip(row) {
                *b += g;
            }
        }
        // dW += dY^T X
        gemm(out_f, n, in_f, T::one(), (grad.data(), 1, out_f), (x.data(), in_f, 1), T::one(), self.weight.grad.data_mut(), in_f, 1);
        let mut dx = Tensor::zeros(&[n, in_f]);
        gemm(n, out_f, in_f, T::one(), (grad.data(), out_f, 1), (self.weight.value.data(), in_f, 1), T::zero(), dx.data_mut(), in_f, 1);
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        v.param(&join(prefix, "weight"), &mut self.weight);
        v.param(&join(prefix, "bias"), &mut self.bias);
    }
}

/// Concatenates `(N, C_i, H, W)` tensors along the channel axis.
pub fn concat_channels<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| Error::shape("concat_channels", ">= 1 input", 0))?;
    let (n, _, h, w) = first.dims4("concat_channels")?;
    let mut total = 0;
    for p in parts {
        let (pn, pc, ph, pw) = p.dims4("concat_channels")?;
        if (pn, ph, pw) != (n, h, w) {
            return Err(Error::shape("concat_channels", (n, h, w), p.shape()));
        }
        total += pc;
    }
    let mut data = Vec::with_capacity(n * total * h * w);
    for s in 0..n {
        for p in parts {
            data.extend_from_slice(p.sample(s));
        }
    }
    Tensor::from_vec(&[n, total, h, w], data)
}

/// Inverse of [`concat_channels`]: splits by the given channel counts.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, channels: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (n, c, h, w) = x.dims4("split_channels")?;
    if channels.iter().sum::<usize>() != c {
        return Err(Error::shape("split_channels", c, channels));
    }
    let hw = h * w;
    let mut out: Vec<Vec<T>> = channels.iter().map(|&k| Vec::with_capacity(n * k * hw)).collect();
    for s in 0..n {
        let sample = x.sample(s);
        let mut off = 0;
        for (buf, &k) in out.iter_mut().zip(channels) {
            buf.extend_from_slice(&sample[off * hw..(off + k) * hw]);
            off += k;
        }
    }
    out.into_iter()
        .zip(channels)
        .map(|(d, &k)| Tensor::from_vec(&[n, k, h, w], d))
        .collect()
}
