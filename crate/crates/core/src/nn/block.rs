use rand_chacha::ChaCha8Rng;

use super::{join, BatchNorm2d, Conv2d, Mode, Module, Relu, Scalar, Tensor, Visitor};
use crate::error::{Error, Result};

/// Basic residual block: two 3x3 conv+BN units with a skip connection.
/// The skip is a 1x1 conv+BN projection when the stride or width changes.
#[derive(Debug, Clone)]
pub struct BasicBlock<T: Scalar> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    relu1: Relu,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
    pub shortcut: Option<(Conv2d<T>, BatchNorm2d<T>)>,
    relu_out: Relu,
}

impl<T: Scalar> BasicBlock<T> {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if !(stride == 1 || stride == 2) {
            return Err(Error::Config(format!("basic block stride must be 1 or 2, got {stride}")));
        }
        let conv1 = Conv2d::new(in_ch, out_ch, 3, stride, 1, rng)?;
        let conv2 = Conv2d::new(out_ch, out_ch, 3, 1, 1, rng)?;
        let shortcut = if stride != 1 || in_ch != out_ch {
            Some((Conv2d::new(in_ch, out_ch, 1, stride, 0, rng)?, BatchNorm2d::new(out_ch)))
        } else {
            None
        };
        Ok(BasicBlock {
            conv1,
            bn1: BatchNorm2d::new(out_ch),
            relu1: Relu::new(),
            conv2,
            bn2: BatchNorm2d::new(out_ch),
            shortcut,
            relu_out: Relu::new(),
        })
    }
}

impl<T: Scalar> Module<T> for BasicBlock<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let a = self.conv1.forward(x, mode)?;
        let a = self.bn1.forward(&a, mode)?;
        let a = self.relu1.forward(&a, mode)?;
        let a = self.conv2.forward(&a, mode)?;
        let mut a = self.bn2.forward(&a, mode)?;
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = conv.forward(x, mode)?;
                a.add_assign(&bn.forward(&s, mode)?)?;
            }
            None => a.add_assign(x)?,
        }
        self.relu_out.forward(&a, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Module::<T>::backward(&mut self.relu_out, grad)?;
        let d = self.bn2.backward(&g)?;
        let d = self.conv2.backward(&d)?;
        let d = Module::<T>::backward(&mut self.relu1, &d)?;
        let d = self.bn1.backward(&d)?;
        let mut dx = self.conv1.backward(&d)?;
        match &mut self.shortcut {
            Some((conv, bn)) => {
                let s = bn.backward(&g)?;
                dx.add_assign(&conv.backward(&s)?)?;
            }
            None => dx.add_assign(&g)?,
        }
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        self.conv1.visit(&join(prefix, "conv1"), v);
        self.bn1.visit(&join(prefix, "bn1"), v);
        self.conv2.visit(&join(prefix, "conv2"), v);
        self.bn2.visit(&join(prefix, "bn2"), v);
        if let Some((conv, bn)) = &mut self.shortcut {
            conv.visit(&join(prefix, "shortcut.conv"), v);
            bn.visit(&join(prefix, "shortcut.bn"), v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_residual_path_gives_relu_of_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut b = BasicBlock::<f64>::new(2, 2, 1, &mut rng).unwrap();
        assert!(b.shortcut.is_none());
        b.conv1.weight.value.data_mut().fill(0.0);
        b.conv2.weight.value.data_mut().fill(0.0);
        b.bn2.gamma.value.data_mut().fill(0.0);
        let x = Tensor::from_vec(&[2, 2, 2, 2], (0..16).map(|i| i as f64 - 8.0).collect()).unwrap();
        let y = b.forward(&x, Mode::Train).unwrap();
        let want: Vec<f64> = x.data().iter().map(|v| v.max(0.0)).collect();
        assert_eq!(y.data(), &want[..]);
    }

    #[test]
    fn stride_two_halves_and_projects() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = BasicBlock::<f32>::new(4, 8, 2, &mut rng).unwrap();
        assert!(b.shortcut.is_some());
        let y = b.forward(&Tensor::zeros(&[2, 4, 8, 8]), Mode::Train).unwrap();
        assert_eq!(y.shape(), &[2, 8, 4, 4]);
        assert!(BasicBlock::<f32>::new(4, 8, 3, &mut rng).is_err());
        assert!(BasicBlock::<f32>::new(4, 8, 1, &mut rng).unwrap().shortcut.is_some());
    }
}
