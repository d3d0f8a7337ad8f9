use super::{join, Mode, Module, Param, Scalar, Tensor, Visitor};
use crate::error::{Error, Result};

/// Per-channel batch normalization over `(N, H, W)`.
///
/// Training mode normalizes with batch statistics and updates the running
/// estimates (`momentum` weight on the new batch, unbiased variance).
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T: Scalar> {
    x_hat: Tensor<T>,
    inv_std: Vec<f64>,
    mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm2d {
            gamma: Param::new(Tensor::full(&[channels], T::one())),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            eps: 1e-5,
            momentum: 0.1,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.numel()
    }
}

impl<T: Scalar> Module<T> for BatchNorm2d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4("batchnorm2d")?;
        if c != self.channels() {
            return Err(Error::shape("batchnorm2d", format!("{} channels", self.channels()), x.shape()));
        }
        let hw = h * w;
        let m = n * hw;
        if mode == Mode::Train && m < 2 {
            return Err(Error::Config("batchnorm2d: training needs more than one value per channel".into()));
        }
        let xd = x.data();
        if mode == Mode::Infer {
            self.cache = None;
            let mut out = x.clone();
            for ch in 0..c {
                let is = 1.0 / (self.running_var.data()[ch].f64() + self.eps).sqrt();
                let scale = self.gamma.value.data()[ch].f64() * is;
                let shift = self.beta.value.data()[ch].f64() - self.running_mean.data()[ch].f64() * scale;
                let (scale, shift) = (T::of(scale), T::of(shift));
                for s in 0..n {
                    out.data_mut()[(s * c + ch) * hw..(s * c + ch + 1) * hw]
                        .iter_mut()
                        .for_each(|v| *v = *v * scale + shift);
                }
            }
            return Ok(out);
        }
        let mut x_hat = Tensor::zeros(x.shape());
        let mut out = Tensor::zeros(x.shape());
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut sum = 0.0;
                    for s in 0..n {
                        sum += xd[(s * c + ch) * hw..(s * c + ch + 1) * hw].iter().map(|v| v.f64()).sum::<f64>();
                    }
                    let mean = sum / m as f64;
                    let mut sq = 0.0;
                    for s in 0..n {
                        sq += xd[(s * c + ch) * hw..(s * c + ch + 1) * hw]
                            .iter()
                            .map(|v| (v.f64() - mean).powi(2))
                            .sum::<f64>();
                    }
                    let var = sq / m as f64;
                    let unbiased = sq / (m - 1) as f64;
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = T::of((1.0 - self.momentum) * rm.f64() + self.momentum * mean);
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = T::of((1.0 - self.momentum) * rv.f64() + self.momentum * unbiased);
                    (mean, var)
                }
                Mode::Eval | Mode::Infer => (self.running_mean.data()[ch].f64(), self.running_var.data()[ch].f64()),
            };
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = is;
            let (g, b) = (self.gamma.value.data()[ch].f64(), self.beta.value.data()[ch].f64());
            for s in 0..n {
                let range = (s * c + ch) * hw..(s * c + ch + 1) * hw;
                for i in range {
                    let xh = (xd[i].f64() - mean) * is;
                    x_hat.data_mut()[i] = T::of(xh);
                    out.data_mut()[i] = T::of(g * xh + b);
                }
            }
        }
        self.cache = Some(Cache { x_hat, inv_std, mode });
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let Cache { x_hat, inv_std, mode } =
            self.cache.take().ok_or_else(|| Error::Config("batchnorm2d: backward before forward".into()))?;
        if grad.shape() != x_hat.shape() {
            return Err(Error::shape("batchnorm2d backward", x_hat.shape(), grad.shape()));
        }
        let (n, c, h, w) = x_hat.dims4("batchnorm2d")?;
        let hw = h * w;
        let m = (n * hw) as f64;
        let (dy, xh) = (grad.data(), x_hat.data());
        let mut dx = Tensor::zeros(x_hat.shape());
        for ch in 0..c {
            let (mut sum_dy, mut sum_dy_xh) = (0.0, 0.0);
            for s in 0..n {
                for i in (s * c + ch) * hw..(s * c + ch + 1) * hw {
                    sum_dy += dy[i].f64();
                    sum_dy_xh += dy[i].f64() * xh[i].f64();
                }
            }
            self.gamma.grad.data_mut()[ch] += T::of(sum_dy_xh);
            self.beta.grad.data_mut()[ch] += T::of(sum_dy);
            let g = self.gamma.value.data()[ch].f64();
            let k = g * inv_std[ch];
            for s in 0..n {
                for i in (s * c + ch) * hw..(s * c + ch + 1) * hw {
                    let v = match mode {
                        Mode::Train => k * (dy[i].f64() - sum_dy / m - xh[i].f64() * sum_dy_xh / m),
                        Mode::Eval | Mode::Infer => k * dy[i].f64(),
                    };
                    dx.data_mut()[i] = T::of(v);
                }
            }
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        v.param(&join(prefix, "gamma"), &mut self.gamma);
        v.param(&join(prefix, "beta"), &mut self.beta);
        v.buffer(&join(prefix, "running_mean"), &mut self.running_mean);
        v.buffer(&join(prefix, "running_var"), &mut self.running_var);
    }
}
