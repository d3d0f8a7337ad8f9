//! Dense-tensor CNN engine with hand-written backward passes.
//!
//! Layers cache what their backward pass needs during `forward`; a
//! `backward` call consumes the gradient of the layer output, accumulates
//! parameter gradients and returns the gradient of the layer input.

mod block;
mod conv;
mod fert;
mod loss;
mod norm;
mod ops;
mod optim;
mod scalar;
mod tensor;

pub use block::BasicBlock;
pub use conv::Conv2d;
pub use fert::{ConvUnit, FertConfig, FertNet, FeatureStack, ResNetHead, StageSpec};
pub use loss::{cross_entropy, softmax};
pub use norm::BatchNorm2d;
pub use ops::{concat_channels, split_channels, GlobalAvgPool, Linear, MaxPool2x2, Relu};
pub use optim::{sgd_update, Sgd};
pub use scalar::{gemm, Scalar};
pub use tensor::Tensor;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    /// Eval statistics without the caches `backward` needs.
    Infer,
}

impl Mode {
    pub fn keeps_cache(self) -> bool {
        self != Mode::Infer
    }
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Walks parameters and non-trainable buffers in a fixed order.
pub trait Visitor<T: Scalar> {
    fn param(&mut self, name: &str, param: &mut Param<T>);
    fn buffer(&mut self, _name: &str, _buffer: &mut Tensor<T>) {}
}

pub trait Module<T: Scalar> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;
    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>>;
    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>);
}

/// Anything whose parameters can be walked from the root.
pub trait Parameterized<T: Scalar> {
    fn visit_params(&mut self, v: &mut dyn Visitor<T>);
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_owned()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Visitor that zeroes every gradient.
pub struct ZeroGrad;

impl<T: Scalar> Visitor<T> for ZeroGrad {
    fn param(&mut self, _name: &str, p: &mut Param<T>) {
        p.zero_grad();
    }
}

/// Adapts a closure over parameters into a [`Visitor`].
pub struct ParamFn<F>(pub F);

impl<T: Scalar, F: FnMut(&str, &mut Param<T>)> Visitor<T> for ParamFn<F> {
    fn param(&mut self, name: &str, p: &mut Param<T>) {
        (self.0)(name, p)
    }
}
