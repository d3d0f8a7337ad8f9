use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    concat_channels, join, split_channels, BasicBlock, BatchNorm2d, Conv2d, GlobalAvgPool, Linear, MaxPool2x2, Mode,
    Module, Param, Scalar, Tensor, Visitor,
};
use crate::error::{Error, Result};
use crate::io::NamedTensor;
use crate::label::NUM_CLASSES;
use crate::radar::ImageKind;

/// One stage of the residual head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub blocks: usize,
    pub channels: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FertConfig {
    pub image_size: usize,
    pub extractor_channels: Vec<usize>,
    pub intermediate_channels: Vec<usize>,
    pub stages: Vec<StageSpec>,
}

impl Default for FertConfig {
    fn default() -> Self {
        FertConfig {
            image_size: 64,
            extractor_channels: vec![8, 16, 16],
            intermediate_channels: vec![32, 32],
            stages: vec![
                StageSpec {
                    blocks: 2,
                    channels: 64,
                    stride: 1,
                },
                StageSpec {
                    blocks: 2,
                    channels: 128,
                    stride: 2,
                },
            ],
        }
    }
}

impl FertConfig {
    /// ResNet34 layout: [3, 4, 6, 3] blocks over 64..512 channels.
    pub fn full_depth() -> Self {
        let stage = |blocks, channels, stride| StageSpec {
            blocks,
            channels,
            stride,
        };
        FertConfig {
            stages: vec![stage(3, 64, 1), stage(4, 128, 2), stage(6, 256, 2), stage(3, 512, 2)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pools = 1usize << self.intermediate_channels.len();
        if self.image_size == 0 || self.image_size % pools != 0 {
            return Err(Error::Config(format!(
                "image_size {} must be a positive multiple of {pools}",
                self.image_size
            )));
        }
        if self.extractor_channels.is_empty() || self.intermediate_channels.is_empty() || self.stages.is_empty() {
            return Err(Error::Config("extractor, intermediate and stage lists must be non-empty".into()));
        }
        if self.extractor_channels.iter().chain(&self.intermediate_channels).any(|&c| c == 0) {
            return Err(Error::Config("channel counts must be >= 1".into()));
        }
        let mut size = self.image_size >> self.intermediate_channels.len();
        for s in &self.stages {
            if s.blocks == 0 || s.channels == 0 || !(s.stride == 1 || s.stride == 2) {
                return Err(Error::Config(format!("invalid stage {s:?}")));
            }
            size = size.div_ceil(s.stride);
        }
        if size == 0 {
            return Err(Error::Config("image too small for the stage strides".into()));
        }
        Ok(())
    }
}

/// conv3x3 + BN + ReLU, optionally followed by 2x2 max pooling.
#[derive(Debug, Clone)]
pub struct ConvUnit<T: Scalar> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
    relu: super::Relu,
    pool: Option<MaxPool2x2>,
}

impl<T: Scalar> ConvUnit<T> {
    fn new(in_ch: usize, out_ch: usize, pool: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(ConvUnit {
            conv: Conv2d::new(in_ch, out_ch, 3, 1, 1, rng)?,
            bn: BatchNorm2d::new(out_ch),
            relu: super::Relu::new(),
            pool: pool.then(MaxPool2x2::new),
        })
    }
}

impl<T: Scalar> Module<T> for ConvUnit<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let y = self.conv.forward(x, mode)?;
        let y = self.bn.forward(&y, mode)?;
        let y = self.relu.forward(&y, mode)?;
        match &mut self.pool {
            Some(p) => p.forward(&y, mode),
            None => Ok(y),
        }
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = match &mut self.pool {
            Some(p) => Module::<T>::backward(p, grad)?,
            None => grad.clone(),
        };
        let g = Module::<T>::backward(&mut self.relu, &g)?;
        let g = self.bn.backward(&g)?;
        self.conv.backward(&g)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        self.conv.visit(&join(prefix, "conv"), v);
        self.bn.visit(&join(prefix, "bn"), v);
    }
}

/// A chain of [`ConvUnit`]s.
#[derive(Debug, Clone)]
pub struct FeatureStack<T: Scalar> {
    pub units: Vec<ConvUnit<T>>,
}

impl<T: Scalar> FeatureStack<T> {
    fn new(in_ch: usize, channels: &[usize], pool: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut units = Vec::with_capacity(channels.len());
        let mut c = in_ch;
        for &k in channels {
            units.push(ConvUnit::new(c, k, pool, rng)?);
            c = k;
        }
        Ok(FeatureStack { units })
    }
}

impl<T: Scalar> Module<T> for FeatureStack<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for u in &mut self.units {
            y = u.forward(&y, mode)?;
        }
        Ok(y)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = grad.clone();
        for u in self.units.iter_mut().rev() {
            g = u.backward(&g)?;
        }
        Ok(g)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        for (i, u) in self.units.iter_mut().enumerate() {
            u.visit(&join(prefix, &i.to_string()), v);
        }
    }
}

/// Residual stages, global average pooling and the class-logit layer.
#[derive(Debug, Clone)]
pub struct ResNetHead<T: Scalar> {
    pub blocks: Vec<BasicBlock<T>>,
    gap: GlobalAvgPool,
    pub fc: Linear<T>,
}

impl<T: Scalar> ResNetHead<T> {
    fn new(in_ch: usize, stages: &[StageSpec], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut blocks = Vec::new();
        let mut c = in_ch;
        for s in stages {
            for b in 0..s.blocks {
                let stride = if b == 0 { s.stride } else { 1 };
                blocks.push(BasicBlock::new(c, s.channels, stride, rng)?);
                c = s.channels;
            }
        }
        Ok(ResNetHead {
            blocks,
            gap: GlobalAvgPool::new(),
            fc: Linear::new(c, NUM_CLASSES, rng)?,
        })
    }
}

impl<T: Scalar> Module<T> for ResNetHead<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut y = x.clone();
        for b in &mut self.blocks {
            y = b.forward(&y, mode)?;
        }
        let y = self.gap.forward(&y, mode)?;
        self.fc.forward(&y, mode)
    }

    fn backward(&mut self, grad: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.fc.backward(grad)?;
        let mut g = Module::<T>::backward(&mut self.gap, &g)?;
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        Ok(g)
    }

    fn visit(&mut self, prefix: &str, v: &mut dyn Visitor<T>) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit(&join(prefix, &format!("block{i}")), v);
        }
        self.fc.visit(&join(prefix, "fc"), v);
    }
}

/// Four-branch fusion network: per-modality extractors, paired
/// intermediate extractors (RDI with micro-RDI, RAI with REI) and a
/// residual head over the concatenated features.
#[derive(Debug, Clone)]
pub struct FertNet<T: Scalar> {
    config: FertConfig,
    pub extractors: [FeatureStack<T>; 4],
    pub intermediates: [FeatureStack<T>; 2],
    pub head: ResNetHead<T>,
}

const BRANCH_NAMES: [&str; 4] = ["rdi", "micro_rdi", "rai", "rei"];

impl<T: Scalar> FertNet<T> {
    pub fn new(config: &FertConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fe = |rng: &mut ChaCha8Rng| FeatureStack::new(1, &config.extractor_channels, false, rng);
        let extractors = [fe(&mut rng)?, fe(&mut rng)?, fe(&mut rng)?, fe(&mut rng)?];
        let fe_out = *config.extractor_channels.last().expect("validated non-empty");
        let mid = |rng: &mut ChaCha8Rng| FeatureStack::new(2 * fe_out, &config.intermediate_channels, true, rng);
        let intermediates = [mid(&mut rng)?, mid(&mut rng)?];
        let mid_out = *config.intermediate_channels.last().expect("validated non-empty");
        let head = ResNetHead::new(2 * mid_out, &config.stages, &mut rng)?;
        Ok(FertNet {
            config: config.clone(),
            extractors,
            intermediates,
            head,
        })
    }

    pub fn config(&self) -> &FertConfig {
        &self.config
    }

    /// Logits `(N, 4)` for inputs ordered RDI, micro-RDI, RAI, REI, each
    /// `(N, 1, S, S)`.
    pub fn forward(&mut self, inputs: [&Tensor<T>; 4], mode: Mode) -> Result<Tensor<T>> {
        let s = self.config.image_size;
        let n = inputs[0].shape().first().copied().unwrap_or(0);
        for (x, kind) in inputs.iter().zip(ImageKind::ALL) {
            if x.shape() != [n, 1, s, s] {
                return Err(Error::shape(kind.name(), [n, 1, s, s], x.shape()));
            }
        }
        let mut feats = Vec::with_capacity(4);
        for (fe, x) in self.extractors.iter_mut().zip(inputs) {
            feats.push(fe.forward(x, mode)?);
        }
        let a = self.intermediates[0].forward(&concat_channels(&[&feats[0], &feats[1]])?, mode)?;
        let b = self.intermediates[1].forward(&concat_channels(&[&feats[2], &feats[3]])?, mode)?;
        self.head.forward(&concat_channels(&[&a, &b])?, mode)
    }

    /// Backpropagates logit gradients; returns the per-branch input gradients.
    pub fn backward(&mut self, grad: &Tensor<T>) -> Result<[Tensor<T>; 4]> {
        let g = self.head.backward(grad)?;
        let mid_out = *self.config.intermediate_channels.last().expect("validated");
        let fe_out = *self.config.extractor_channels.last().expect("validated");
        let mut halves = split_channels(&g, &[mid_out, mid_out])?.into_iter();
        let ga = self.intermediates[0].backward(&halves.next().expect("two halves"))?;
        let gb = self.intermediates[1].backward(&halves.next().expect("two halves"))?;
        let mut branch = split_channels(&ga, &[fe_out, fe_out])?;
        branch.extend(split_channels(&gb, &[fe_out, fe_out])?);
        let mut out = Vec::with_capacity(4);
        for (fe, g) in self.extractors.iter_mut().zip(&branch) {
            out.push(fe.backward(g)?);
        }
        Ok(out.try_into().expect("four branches"))
    }

    pub fn visit(&mut self, v: &mut dyn Visitor<T>) {
        for (fe, name) in self.extractors.iter_mut().zip(BRANCH_NAMES) {
            fe.visit(&format!("fe.{name}"), v);
        }
        for (i, m) in self.intermediates.iter_mut().enumerate() {
            m.visit(&format!("mid.{i}"), v);
        }
        self.head.visit("head", v);
    }

    pub fn zero_grad(&mut self) {
        self.visit(&mut super::ZeroGrad);
    }

    pub fn num_params(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut super::ParamFn(|_: &str, p: &mut Param<T>| n += p.value.numel()));
        n
    }

    /// All parameters, BN statistics and architecture metadata as named
    /// 32-bit tensors.
    pub fn to_tensors(&mut self) -> Vec<NamedTensor> {
        let mut out = meta_tensors(&self.config);
        struct Collect<'a>(&'a mut Vec<NamedTensor>);
        impl<T: Scalar> Visitor<T> for Collect<'_> {
            fn param(&mut self, name: &str, p: &mut Param<T>) {
                self.buffer(name, &mut p.value);
            }
            fn buffer(&mut self, name: &str, t: &mut Tensor<T>) {
                self.0.push(NamedTensor {
                    name: name.to_owned(),
                    dims: t.shape().iter().map(|&d| d as u32).collect(),
                    data: t.data().iter().map(|v| v.f64() as f32).collect(),
                });
            }
        }
        self.visit(&mut Collect(&mut out));
        out
    }

    /// Rebuilds a network from [`Self::to_tensors`] output.
    pub fn from_tensors(tensors: &[NamedTensor]) -> Result<Self> {
        let mut by_name: HashMap<&str, &NamedTensor> = HashMap::new();
        for t in tensors {
            if by_name.insert(&t.name, t).is_some() {
                return Err(Error::Config(format!("model: duplicate tensor {:?}", t.name)));
            }
        }
        let config = config_from_meta(&by_name)?;
        let mut net = FertNet::new(&config, 0)?;
        struct Load<'a> {
            by_name: &'a HashMap<&'a str, &'a NamedTensor>,
            used: usize,
            err: Option<Error>,
        }
        impl<T: Scalar> Visitor<T> for Load<'_> {
            fn param(&mut self, name: &str, p: &mut Param<T>) {
                self.buffer(name, &mut p.value);
            }
            fn buffer(&mut self, name: &str, t: &mut Tensor<T>) {
                if self.err.is_some() {
                    return;
                }
                let Some(src) = self.by_name.get(name) else {
                    self.err = Some(Error::Config(format!("model: missing tensor {name:?}")));
                    return;
                };
                let dims: Vec<usize> = src.dims.iter().map(|&d| d as usize).collect();
                if dims != t.shape() {
                    self.err = Some(Error::shape("model tensor", t.shape(), format!("{name}: {dims:?}")));
                    return;
                }
                for (d, &s) in t.data_mut().iter_mut().zip(&src.data) {
                    *d = T::of(s as f64);
                }
                self.used += 1;
            }
        }
        let mut load = Load {
            by_name: &by_name,
            used: 0,
            err: None,
        };
        net.visit(&mut load);
        if let Some(e) = load.err {
            return Err(e);
        }
        let meta = by_name.keys().filter(|k| k.starts_with("meta.")).count();
        if load.used + meta != tensors.len() {
            return Err(Error::Config(format!(
                "model: {} unrecognized tensors",
                tensors.len() - load.used - meta
            )));
        }
        if let Some(rv) = tensors.iter().find(|t| t.name.ends_with("running_var") && t.data.iter().any(|&v| !(v > 0.0))) {
            return Err(Error::Numeric(format!("model: {} has non-positive entries", rv.name)));
        }
        Ok(net)
    }

    /// Same weights and statistics at another precision.
    pub fn cast<U: Scalar>(&mut self) -> Result<FertNet<U>> {
        struct Grab<'a>(&'a mut Vec<Vec<f64>>);
        impl<T: Scalar> Visitor<T> for Grab<'_> {
            fn param(&mut self, name: &str, p: &mut Param<T>) {
                self.buffer(name, &mut p.value);
            }
            fn buffer(&mut self, _name: &str, t: &mut Tensor<T>) {
                self.0.push(t.data().iter().map(|v| v.f64()).collect());
            }
        }
        struct Put(std::vec::IntoIter<Vec<f64>>);
        impl<T: Scalar> Visitor<T> for Put {
            fn param(&mut self, name: &str, p: &mut Param<T>) {
                self.buffer(name, &mut p.value);
            }
            fn buffer(&mut self, _name: &str, t: &mut Tensor<T>) {
                let src = self.0.next().expect("identical architecture");
                for (d, s) in t.data_mut().iter_mut().zip(src) {
                    *d = T::of(s);
                }
            }
        }
        let mut vals = Vec::new();
        self.visit(&mut Grab(&mut vals));
        let mut out = FertNet::<U>::new(&self.config, 0)?;
        out.visit(&mut Put(vals.into_iter()));
        Ok(out)
    }
}

impl<T: Scalar> super::Parameterized<T> for FertNet<T> {
    fn visit_params(&mut self, v: &mut dyn Visitor<T>) {
        self.visit(v)
    }
}

fn meta_tensors(cfg: &FertConfig) -> Vec<NamedTensor> {
    let vec = |name: &str, v: Vec<usize>| NamedTensor {
        name: name.to_owned(),
        dims: vec![v.len() as u32],
        data: v.into_iter().map(|x| x as f32).collect(),
    };
    let mut stages = vec("meta.stages", cfg.stages.iter().flat_map(|s| [s.blocks, s.channels, s.stride]).collect());
    stages.dims = vec![cfg.stages.len() as u32, 3];
    vec![
        vec("meta.image_size", vec![cfg.image_size]),
        vec("meta.extractor_channels", cfg.extractor_channels.clone()),
        vec("meta.intermediate_channels", cfg.intermediate_channels.clone()),
        stages,
    ]
}

fn config_from_meta(by_name: &HashMap<&str, &NamedTensor>) -> Result<FertConfig> {
    let ints = |name: &str| -> Result<Vec<usize>> {
        let t = by_name
            .get(name)
            .ok_or_else(|| Error::Config(format!("model: missing tensor {name:?}")))?;
        t.data
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v < 1e7 {
                    Ok(v as usize)
                } else {
                    Err(Error::Config(format!("model: {name} holds non-integer {v}")))
                }
            })
            .collect()
    };
    let image = ints("meta.image_size")?;
    let stages = ints("meta.stages")?;
    if image.len() != 1 || stages.len() % 3 != 0 {
        return Err(Error::Config("model: malformed metadata".into()));
    }
    let config = FertConfig {
        image_size: image[0],
        extractor_channels: ints("meta.extractor_channels")?,
        intermediate_channels: ints("meta.intermediate_channels")?,
        stages: stages
            .chunks(3)
            .map(|c| StageSpec {
                blocks: c[0],
                channels: c[1],
                stride: c[2],
            })
            .collect(),
    };
    config.validate()?;
    Ok(config)
}
