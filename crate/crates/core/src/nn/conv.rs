use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{gemm, join, Mode, Module, Param, Scalar, Tensor, Visitor};
use crate::error::{Error, Result};

/// 2-D convolution with square kernel, stride and zero padding, lowered to
/// im2col + GEMM per sample.
#[derive(Debug, Clone)]
pub struct Conv2d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    input: Option<Tensor<T>>,
    /// im2col buffer kept between calls; large enough that allocating it
    /// per call shows up as page faults in the streaming path.
    scratch: Vec<T>,
}

/// Target column count of one unfolded block in the forward pass.
const BLOCK_COLS: usize = 256;

/// He-uniform draw: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
pub(crate) fn he_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.random_range(-bound..bound))).collect();
    Tensor::from_vec(shape, data).expect("shape matches draw count")
}

/// Output columns `lo..hi` whose input column `ox * s + kj - p` lies in `0..w`.
fn valid_span(kj: usize, w: usize, wo: usize, s: isize, p: isize) -> (usize, usize) {
    let off = kj as isize - p;
    let lo = if off >= 0 { 0 } else { ((-off + s - 1) / s) as usize };
    let hi = if w as isize - off <= 0 { 0 } else { ((w as isize - off + s - 1) / s) as usize };
    let hi = hi.min(wo);
    (lo.min(hi), hi)
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
            return Err(Error::Config(format!(
                "conv2d: in={in_ch} out={out_ch} kernel={kernel} stride={stride} must all be >= 1"
            )));
        }
        let fan_in = in_ch * kernel * kernel;
        Ok(Conv2d {
            weight: Param::new(he_uniform(&[out_ch, in_ch, kernel, kernel], fan_in, rng)),
            bias: Param::new(Tensor::zeros(&[out_ch])),
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
            input: None,
            scratch: Vec::new(),
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.pad, w + 2 * self.pad);
        if hp < self.kernel || wp < self.kernel {
            return Err(Error::shape("conv2d", format!("spatial >= {}", self.kernel), (h, w)));
        }
        Ok(((hp - self.kernel) / self.stride + 1, (wp - self.kernel) / self.stride + 1))
    }

    /// Unfolds output rows `rows` of one `(C, H, W)` sample into a
    /// `(C*k*k, rows.len()*Wo)` matrix.
    fn im2col(&self, x: &[T], h: usize, w: usize, wo: usize, rows: Range<usize>, cols: &mut [T]) {
        let k = self.kernel;
        let (s, p) = (self.stride as isize, self.pad as isize);
        let len = rows.len() * wo;
        for c in 0..self.in_ch {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((c * k + ki) * k + kj) * len;
                    for (r, oy) in rows.clone().enumerate() {
                        let iy = oy as isize * s + ki as isize - p;
                        let dst = &mut cols[row + r * wo..row + (r + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            dst.fill(T::zero());
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let (lo, hi) = valid_span(kj, w, wo, s, p);
                        dst[..lo].fill(T::zero());
                        dst[hi..].fill(T::zero());
                        if s == 1 {
                            let x0 = (lo as isize + kj as isize - p) as usize;
                            dst[lo..hi].copy_from_slice(&src[x0..x0 + hi - lo]);
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate().take(hi).skip(lo) {
                                *d = src[(ox as isize * s + kj as isize - p) as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Self::im2col`]: scatters-adds columns back into `dx`.
    fn col2im(&self, cols: &[T], h: usize, w: usize, ho: usize, wo: usize, dx: &mut [T]) {
        let k = self.kernel;
        let (s, p) = (self.stride as isize, self.pad as isize);
        for c in 0..self.in_ch {
            let plane = &mut dx[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = ((c * k + ki) * k + kj) * ho * wo;
                    for oy in 0..ho {
                        let iy = oy as isize * s + ki as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &cols[row + oy * wo..row + (oy + 1) * wo];
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        let (lo, hi) = valid_span(kj, w, wo, s, p);
                        if s == 1 {
                            let x0 = (lo as isize + kj as isize - p) as usize;
                            for (d, &g) in dst[x0..x0 + hi - lo].iter_mut().zip(&src[lo..hi]) {
                                *d += g;
                            }
                        } else {
                            for (ox, &g) in src.iter().enumerate().take(hi).skip(lo) {
                                dst[(ox as isize * s + kj as isize - p) as usize] += g;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4("conv2d")?;
        if c != self.in_ch {
            return Err(Error::shape("conv2d", format!("{} input channels", self.in_ch), x.shape()));
        }
        let (ho, wo) = self.output_hw(h, w)?;
        let ckk = self.in_ch * self.kernel * self.kernel;
        let hw = ho * wo;
        let mut out = Tensor::zeros(&[n, self.out_ch, ho, wo]);
        // Output rows are unfolded a block at a time so the column matrix
        // stays cache-resident.
        let block = (BLOCK_COLS / wo).clamp(1, ho);
        let mut cols = std::mem::take(&mut self.scratch);
        cols.resize(ckk * block * wo, T::zero());
        for s in 0..n {
            let y = out.sample_mut(s);
            for oy in (0..ho).step_by(block) {
                let rows = oy..(oy + block).min(ho);
                let nc = rows.len() * wo;
                self.im2col(x.sample(s), h, w, wo, rows, &mut cols);
                gemm(
                    self.out_ch,
                    ckk,
                    nc,
                    T::one(),
                    (self.weight.value.data(), ckk, 1),
                    (&cols[..ckk * nc], nc, 1),
                    T::zero(),
                    &mut y[oy * wo..],
                    hw,
                    1,
                );
            }
            for (o, &b) in self.bias.value.data().iter().enumerate() {
                y[o * hw..(o + 1) * hw].iter_mut().for_each(|v| *v += b);
            }
        }
        self.scratch = cols;
        self.input = mode.keeps_cache().then(|| x.clone());
        Ok(out)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self.input.take().ok_or_else(|| Error::Config("conv2d: backward before forward".into()))?;
        let (n, _, h, w) = x.dims4("conv2d")?;
        let (ho, wo) = self.output_hw(h, w)?;
        if grad.shape() != [n, self.out_ch, ho, wo] {
            return Err(Error::shape("conv2d backward", [n, self.out_ch, ho, wo], grad.shape()));
        }
        let ckk = self.in_ch * self.kernel * self.kernel;
        let hw = ho * wo;
        let mut dx = Tensor::zeros(x.shape());
        let mut cols = std::mem::take(&mut self.scratch);
        cols.resize(ckk * hw, T::zero());
        let mut dcols = vec![T::zero(); ckk * hw];
        for s in 0..n {
            let dy = grad.sample(s);
            for (o, db) in self.bias.grad.data_mut().iter_mut().enumerate() {
                *db += dy[o * hw..(o + 1) * hw].iter().copied().sum::<T>();
            }
            self.im2col(x.sample(s), h, w, wo, 0..ho, &mut cols);
            // dW += dY * cols^T
            gemm(
                self.out_ch,
                hw,
                ckk,
                T::one(),
                (dy, hw, 1),
                (&cols, 1, hw),
                T::one(),
                self.weight.grad.data_mut(),
                ckk,
                1,
            );
            // dcols = W^T * dY
            gemm(
                ckk,
                self.out_ch,
                hw,
                T::one(),
                (self.weight.value.data(), 1, ckk),
                (dy, hw, 1),
                T::zero(),
                &mut dcols,
                hw,
                1,
            );
            self.col2im(&dcols, h, w, ho, wo, dx.sample_mut(s));
        }
        self.scratch = cols;
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        v.param(&join(prefix, "weight"), &mut self.weight);
        v.param(&join(prefix, "bias"), &mut self.bias);
    }
}
