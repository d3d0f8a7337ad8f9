//! Dataset assembly, training, evaluation and the integration-window ablation.

mod ablation;
mod classifier;
mod dataset;
mod eval;
mod fit;
mod stream;

pub use ablation::{ablation_e_respd, run_once, AblationReport, ClassDelta, RunResult};
pub use classifier::{load_model, model_bytes, model_from_bytes, save_model, Classifier, Prediction};
pub use dataset::{
    build_dataset, process_recordings, sample_tensors, split_recordings, Dataset, DatasetOptions, Sample, Split,
};
pub use eval::{argmax, evaluate, ClassMetrics, EvalReport, LatencyStats};
pub use fit::{batches, fit, train, TrainConfig, TrainOutcome};
pub use stream::{replay, StreamReport, QUEUE_DEPTH};
