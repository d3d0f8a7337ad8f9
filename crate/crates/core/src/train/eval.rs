use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{sample_tensors, Dataset};
use crate::error::{Error, Result};
use crate::label::{ClassLabel, NUM_CLASSES};
use crate::nn::{FertNet, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: ClassLabel,
    pub support: u64,
    /// Recall in percent; `None` when the class has no samples.
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(values: &[f64]) -> Self {
        if values.is_empty() {
            return LatencyStats::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p / 100.0 * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        LatencyStats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: rank(50.0),
            p95: rank(95.0),
            p99: rank(99.0),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    /// Mean of the per-class accuracies of classes present, in percent.
    pub average: f64,
    /// `matrix[true][predicted]` counts in label-index order.
    pub matrix: [[u64; NUM_CLASSES]; NUM_CLASSES],
    pub samples: u64,
    /// Per-window pipeline + inference latency.
    pub latency_ms: LatencyStats,
    pub wall_clock_s: f64,
}

impl EvalReport {
    /// Builds the counting part of a report from `(truth, prediction)` pairs.
    pub fn from_predictions(pairs: &[(ClassLabel, ClassLabel)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("cannot evaluate an empty dataset".into()));
        }
        let mut matrix = [[0u64; NUM_CLASSES]; NUM_CLASSES];
        for &(t, p) in pairs {
            matrix[t.index()][p.index()] += 1;
        }
        let pct = |num: u64, den: u64| (den > 0).then(|| 100.0 * num as f64 / den as f64);
        let per_class: Vec<ClassMetrics> = ClassLabel::ALL
            .iter()
            .map(|&label| {
                let i = label.index();
                let support: u64 = matrix[i].iter().sum();
                let predicted: u64 = (0..NUM_CLASSES).map(|r| matrix[r][i]).sum();
                let accuracy = pct(matrix[i][i], support);
                let precision = pct(matrix[i][i], predicted);
                let f1 = match (accuracy, precision) {
                    (Some(r), Some(p)) if r + p > 0.0 => Some(2.0 * r * p / (r + p)),
                    (Some(_), Some(_)) => Some(0.0),
                    _ => None,
                };
                ClassMetrics {
                    label,
                    support,
                    accuracy,
                    precision,
                    f1,
                }
            })
            .collect();
        let present: Vec<f64> = per_class.iter().filter_map(|c| c.accuracy).collect();
        Ok(EvalReport {
            average: present.iter().sum::<f64>() / present.len() as f64,
            per_class,
            matrix,
            samples: pairs.len() as u64,
            latency_ms: LatencyStats::default(),
            wall_clock_s: 0.0,
        })
    }

    pub fn accuracy(&self, label: ClassLabel) -> Option<f64> {
        self.per_class[label.index()].accuracy
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Confusion matrix as a binary graymap, rows normalized, `cell` pixels
    /// per entry.
    pub fn confusion_pgm(&self, cell: usize) -> Vec<u8> {
        let side = NUM_CLASSES * cell;
        let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
        for r in 0..NUM_CLASSES {
            let total: u64 = self.matrix[r].iter().sum();
            let row: Vec<u8> = (0..NUM_CLASSES)
                .flat_map(|c| {
                    let v = if total == 0 {
                        0
                    } else {
                        (255.0 * self.matrix[r][c] as f64 / total as f64).round() as u8
                    };
                    std::iter::repeat_n(v, cell)
                })
                .collect();
            for _ in 0..cell {
                out.extend_from_slice(&row);
            }
        }
        out
    }
}

/// Classifies every sample one window at a time (eval mode) and reports
/// accuracy and per-window latency.
pub fn evaluate(net: &mut FertNet<f32>, data: &Dataset) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate an empty dataset".into()));
    }
    let start = Instant::now();
    let mut pairs = Vec::with_capacity(data.len());
    let mut latency = Vec::with_capacity(data.len());
    for s in &data.samples {
        let t = Instant::now();
        let x = sample_tensors(&[s], data.image_size)?;
        let logits = net.forward([&x[0], &x[1], &x[2], &x[3]], Mode::Infer)?;
        logits.check_finite("logits")?;
        let pred = argmax(logits.data());
        latency.push(s.dsp_ms + t.elapsed().as_secs_f64() * 1e3);
        pairs.push((s.label, ClassLabel::from_index(pred).expect("4 logits")));
    }
    let mut report = EvalReport::from_predictions(&pairs)?;
    report.latency_ms = LatencyStats::from_samples(&latency);
    report.wall_clock_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Index of the first maximum.
pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
