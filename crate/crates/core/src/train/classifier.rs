use std::path::Path;

use crate::dsp::{FeatureWindow, Pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::{decode_model, encode_model, hash_bytes, read_model_file, write_model_file};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::nn::{softmax, FertNet, Mode, Tensor};
use crate::radar::{AdcCube, RadarConfig};

pub fn save_model(path: &Path, net: &mut FertNet<f32>) -> Result<()> {
    write_model_file(path, &net.to_tensors())
}

pub fn load_model(path: &Path) -> Result<FertNet<f32>> {
    FertNet::from_tensors(&read_model_file(path)?)
}

/// Serialized model bytes and their SHA-256.
pub fn model_bytes(net: &mut FertNet<f32>) -> Result<(Vec<u8>, String)> {
    let bytes = encode_model(&net.to_tensors())?;
    let hash = hash_bytes(&bytes);
    Ok((bytes, hash))
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<FertNet<f32>> {
    FertNet::from_tensors(&decode_model(bytes)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub frame_index: u64,
    pub label: ClassLabel,
    pub confidence: f64,
    pub probabilities: [f64; NUM_CLASSES],
}

/// Frame-in, label-out wrapper around a pipeline and a trained network.
#[derive(Debug, Clone)]
pub struct Classifier {
    pipeline: Pipeline,
    net: FertNet<f32>,
}

impl Classifier {
    pub fn new(cfg: &RadarConfig, pcfg: &PipelineConfig, net: FertNet<f32>) -> Result<Self> {
        if net.config().image_size != cfg.n_range_bins() || net.config().image_size != cfg.n_chirps {
            return Err(Error::Config(format!(
                "network expects {0}x{0} images; radar produces {1} range bins x {2} chirps",
                net.config().image_size,
                cfg.n_range_bins(),
                cfg.n_chirps
            )));
        }
        Ok(Classifier {
            pipeline: Pipeline::new(cfg, pcfg)?,
            net,
        })
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn reset(&mut self) {
        self.pipeline.reset();
    }

    pub fn push_frame(&mut self, cube: &AdcCube) -> Result<Option<Prediction>> {
        match self.pipeline.push_frame(cube)? {
            Some(w) => self.predict(&w).map(Some),
            None => Ok(None),
        }
    }

    pub fn predict(&mut self, w: &FeatureWindow) -> Result<Prediction> {
        let s = self.net.config().image_size;
        let x: Vec<Tensor<f32>> = w
            .images()
            .iter()
            .map(|img| Tensor::from_vec(&[1, 1, img.rows, img.cols], img.data.clone()))
            .collect::<Result<_>>()?;
        if x.iter().any(|t| t.shape() != [1, 1, s, s]) {
            return Err(Error::shape("classifier", [1, 1, s, s], x[0].shape()));
        }
        for t in &x {
            t.check_finite("classifier input")?;
        }
        let logits = self.net.forward([&x[0], &x[1], &x[2], &x[3]], Mode::Infer)?;
        logits.check_finite("logits")?;
        let p = softmax(&logits)?.remove(0);
        let best = (0..NUM_CLASSES).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        Ok(Prediction {
            frame_index: w.frame_index,
            label: ClassLabel::from_index(best).expect("4 classes"),
            confidence: p[best],
            probabilities: p.try_into().expect("4 classes"),
        })
    }
}
