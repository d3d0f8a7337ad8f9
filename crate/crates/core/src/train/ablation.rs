use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_dataset, evaluate, fit, DatasetOptions, EvalReport, TrainConfig};
use crate::dsp::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{hash_files, read_manifest};
use crate::label::ClassLabel;
use crate::nn::FertNet;
use crate::radar::RadarConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub label: ClassLabel,
    /// Accuracy with integration minus accuracy without, in points.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub recordings_sha256: String,
    pub window: usize,
    pub min_frame_index: u64,
    pub with_e_respd: EvalReport,
    pub without_e_respd: EvalReport,
    pub per_class_delta: Vec<ClassDelta>,
    pub average_delta: f64,
}

/// One train/evaluate run at a given integration window.
pub struct RunResult {
    pub model: FertNet<f32>,
    pub report: EvalReport,
    pub model_sha256: String,
    pub epoch_mean_loss: Vec<f64>,
}

/// Builds the datasets at `window`, trains from scratch and evaluates.
pub fn run_once(
    manifest: &Path,
    cfg: &RadarConfig,
    train_cfg: &TrainConfig,
    opts: &DatasetOptions,
    window: usize,
) -> Result<RunResult> {
    let opts = DatasetOptions {
        pipeline: PipelineConfig {
            window,
            ..opts.pipeline.clone()
        },
        ..opts.clone()
    };
    let (train, test) = build_dataset(manifest, cfg, &opts)?;
    let (mut net, outcome) = fit(&train, train_cfg)?;
    let report = evaluate(&mut net, &test)?;
    let (_, model_sha256) = super::model_bytes(&mut net)?;
    Ok(RunResult {
        model: net,
        report,
        model_sha256,
        epoch_mean_loss: outcome.epoch_mean_loss,
    })
}

/// Trains and evaluates twice under identical seeds, recordings and
/// hyperparameters: once with `train_cfg.e_respd_window`, once with a
/// window of 1. Both runs score windows completed at the same frames.
pub fn ablation_e_respd(
    manifest: &Path,
    cfg: &RadarConfig,
    train_cfg: &TrainConfig,
    opts: &DatasetOptions,
) -> Result<AblationReport> {
    let paths: Vec<_> = read_manifest(manifest)?.iter().map(|e| e.resolve(manifest)).collect();
    let window = train_cfg.e_respd_window;
    let aligned = DatasetOptions {
        min_frame_index: opts
            .min_frame_index
            .max(PipelineConfig::with_window(window).latency_frames() as u64 - 1),
        ..opts.clone()
    };

    let hash_before = hash_files(&paths)?;
    let with = run_once(manifest, cfg, &TrainConfig { ablation: false, ..train_cfg.clone() }, &aligned, window)?;
    let hash_between = hash_files(&paths)?;
    let without = run_once(manifest, cfg, &TrainConfig { ablation: true, ..train_cfg.clone() }, &aligned, 1)?;
    if hash_before != hash_between || hash_between != hash_files(&paths)? {
        return Err(Error::Config("recordings changed during the ablation".into()));
    }

    let per_class_delta = ClassLabel::ALL
        .iter()
        .map(|&label| ClassDelta {
            label,
            delta: with
                .report
                .accuracy(label)
                .zip(without.report.accuracy(label))
                .map(|(a, b)| a - b),
        })
        .collect();
    Ok(AblationReport {
        recordings_sha256: hash_before,
        window,
        min_frame_index: aligned.min_frame_index,
        average_delta: with.report.average - without.report.average,
        with_e_respd: with.report,
        without_e_respd: without.report,
        per_class_delta,
    })
}
