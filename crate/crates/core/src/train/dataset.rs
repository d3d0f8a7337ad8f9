use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dsp::{FeatureWindow, Pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::{read_manifest, read_recording, ManifestEntry};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::nn::Tensor;
use crate::radar::RadarConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// One labeled feature window.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// RDI, micro-RDI, RAI, REI, each `image_size * image_size`.
    pub images: [Vec<f32>; 4],
    pub label: ClassLabel,
    /// Index into [`Dataset::recordings`].
    pub recording: usize,
    pub frame_index: u64,
    /// Pipeline time spent on the frame that completed this window.
    pub dsp_ms: f64,
}

impl Sample {
    pub fn from_window(w: &FeatureWindow, label: ClassLabel, recording: usize, dsp_ms: f64) -> Result<Self> {
        let side = w.rdi.rows;
        for img in w.images() {
            if img.rows != side || img.cols != side {
                return Err(Error::shape("sample", [side, side], [img.rows, img.cols]));
            }
        }
        Ok(Sample {
            images: w.images().map(|i| i.data.clone()),
            label,
            recording,
            frame_index: w.frame_index,
            dsp_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub image_size: usize,
    pub recordings: Vec<PathBuf>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for s in &self.samples {
            c[s.label.index()] += 1;
        }
        c
    }

    /// Network inputs and label indices for the samples at `indices`.
    pub fn batch(&self, indices: &[usize]) -> Result<([Tensor<f32>; 4], Vec<usize>)> {
        let refs: Vec<&Sample> = indices.iter().map(|&i| &self.samples[i]).collect();
        let inputs = sample_tensors(&refs, self.image_size)?;
        Ok((inputs, refs.iter().map(|s| s.label.index()).collect()))
    }
}

/// Stacks samples into four `(N, 1, S, S)` tensors.
pub fn sample_tensors(samples: &[&Sample], image_size: usize) -> Result<[Tensor<f32>; 4]> {
    let n = samples.len();
    let len = image_size * image_size;
    let mut out = Vec::with_capacity(4);
    for b in 0..4 {
        let mut data = Vec::with_capacity(n * len);
        for s in samples {
            if s.images[b].len() != len {
                return Err(Error::shape("sample_tensors", len, s.images[b].len()));
            }
            data.extend_from_slice(&s.images[b]);
        }
        out.push(Tensor::from_vec(&[n, 1, image_size, image_size], data)?);
    }
    Ok(out.try_into().expect("four modalities"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub pipeline: PipelineConfig,
    /// Fraction of each class's recordings used for training.
    pub split_ratio: f64,
    pub seed: u64,
    /// Windows completed before this frame index are discarded.
    pub min_frame_index: u64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            pipeline: PipelineConfig::default(),
            split_ratio: 0.75,
            seed: 0,
            min_frame_index: 0,
        }
    }
}

/// Per-class recording split: `(train, test)` manifest indices.
pub fn split_recordings(
    entries: &[ManifestEntry],
    split_ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(split_ratio > 0.0 && split_ratio < 1.0) {
        return Err(Error::Config(format!("split_ratio {split_ratio} must be in (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for label in ClassLabel::ALL {
        let mut idx: Vec<usize> = (0..entries.len()).filter(|&i| entries[i].label == Some(label)).collect();
        if idx.len() < 2 {
            return Err(Error::Config(format!(
                "class {label} has {} recordings; at least 2 are needed for disjoint splits",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_train = ((split_ratio * n as f64).round() as usize).clamp(1, n - 1);
        let (a, b) = idx.split_at(n_train);
        train.extend_from_slice(a);
        test.extend_from_slice(b);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Reads the manifest, splits recordings per class, runs the pipeline on each
/// and returns class-balanced `(train, test)` datasets.
pub fn build_dataset(manifest: &Path, cfg: &RadarConfig, opts: &DatasetOptions) -> Result<(Dataset, Dataset)> {
    let entries = read_manifest(manifest)?;
    if let Some(e) = entries.iter().find(|e| e.label.is_none()) {
        return Err(Error::Config(format!("manifest entry {} is unlabeled", e.path)));
    }
    let (train_idx, test_idx) = split_recordings(&entries, opts.split_ratio, opts.seed)?;
    let build = |split, idx: &[usize]| -> Result<Dataset> {
        let paths: Vec<PathBuf> = idx.iter().map(|&i| entries[i].resolve(manifest)).collect();
        let labels: Vec<ClassLabel> = idx.iter().map(|&i| entries[i].label.expect("checked above")).collect();
        process_recordings(split, &paths, &labels, cfg, opts)
    };
    Ok((build(Split::Train, &train_idx)?, build(Split::Test, &test_idx)?))
}

/// Runs each recording through its own pipeline (in parallel, results kept in
/// input order) and balances the classes by truncation.
pub fn process_recordings(
    split: Split,
    paths: &[PathBuf],
    labels: &[ClassLabel],
    cfg: &RadarConfig,
    opts: &DatasetOptions,
) -> Result<Dataset> {
    let per_recording = paths
        .par_iter()
        .zip(labels)
        .enumerate()
        .map(|(r, (path, &label))| -> Result<Vec<Sample>> {
            let rec = read_recording(path)?;
            if rec.label != Some(label) {
                return Err(Error::Config(format!(
                    "{}: file label {:?} disagrees with manifest label {label}",
                    path.display(),
                    rec.label
                )));
            }
            rec.validate(cfg)?;
            let mut pipeline = Pipeline::new(cfg, &opts.pipeline)?;
            let mut out = Vec::new();
            for frame in &rec.frames {
                let t = Instant::now();
                let w = pipeline.push_frame(frame)?;
                let dsp_ms = t.elapsed().as_secs_f64() * 1e3;
                if let Some(w) = w.filter(|w| w.frame_index >= opts.min_frame_index) {
                    out.push(Sample::from_window(&w, label, r, dsp_ms)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples: Vec<Sample> = per_recording.into_iter().flatten().collect();
    let image_size = samples.first().map_or(cfg.n_range_bins(), |s| (s.images[0].len() as f64).sqrt() as usize);
    let mut counts = [0usize; NUM_CLASSES];
    for s in &samples {
        counts[s.label.index()] += 1;
    }
    let keep = counts.iter().copied().min().unwrap_or(0);
    let mut seen = [0usize; NUM_CLASSES];
    samples.retain(|s| {
        let c = &mut seen[s.label.index()];
        *c += 1;
        *c <= keep
    });
    Ok(Dataset {
        split,
        image_size,
        recordings: paths.to_vec(),
        samples,
    })
}
