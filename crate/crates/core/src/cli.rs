//! The `fert` command-line tool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dsp::{process_stream, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::{self, FeatureFile};
use crate::label::ClassLabel;
use crate::radar::RadarConfig;
use crate::sim::{generate_dataset, DatasetSpec, SceneTemplates};
use crate::train::{
    ablation_e_respd, build_dataset, evaluate, fit, load_model, replay, save_model, Classifier, DatasetOptions,
    TrainConfig,
};

/// Settings shared by every subcommand, loaded from `--config`. Missing
/// sections take their defaults; a present `radar` section must be complete.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub radar: RadarConfig,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
    pub split_ratio: Option<f64>,
    pub min_frame_index: u64,
    /// Scene template file; the bundled templates when absent.
    pub templates: Option<PathBuf>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: AppConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.radar.validate()?;
        Ok(cfg)
    }

    fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            pipeline: PipelineConfig {
                window: self.train.window(),
                ..self.pipeline.clone()
            },
            split_ratio: self.split_ratio.unwrap_or(0.75),
            seed: self.train.seed,
            min_frame_index: self.min_frame_index,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fert", version, about = "Radar facial-expression recognition toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset and its manifest.
    Simulate(SimulateArgs),
    /// Run the image pipeline over one recording and write a feature file.
    Preprocess(PreprocessArgs),
    /// Train a classifier on the training split of a manifest.
    Train(TrainArgs),
    /// Evaluate a model on the test split of a manifest.
    Eval(EvalArgs),
    /// Train and evaluate with and without temporal integration.
    Ablate(AblateArgs),
    /// Replay a recording through a model, one prediction per window.
    Stream(StreamArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunOverrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Temporal integration window in frames.
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub per_class: usize,
    #[arg(long, default_value_t = 260)]
    pub frames: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Train without temporal integration (window 1).
    #[arg(long)]
    pub ablation: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the confusion-matrix heatmap (PGM) here.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunOverrides,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    /// Pace input at the radar frame period.
    #[arg(long)]
    pub realtime: bool,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<AppConfig> {
    match &common.config {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn apply(cfg: &mut AppConfig, run: &RunOverrides) {
    if let Some(seed) = run.seed {
        cfg.train.seed = seed;
    }
    if let Some(w) = run.window {
        cfg.train.e_respd_window = w;
        cfg.pipeline.window = w;
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Preprocess(a) => preprocess(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Stream(a) => stream(a),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let templates = match &cfg.templates {
        Some(p) => SceneTemplates::load(p)?,
        None => SceneTemplates::default(),
    };
    let latency = cfg.pipeline.latency_frames();
    if a.frames < latency {
        eprintln!(
            "warning: {} frames per recording; a window of {} needs {latency}, so no windows will be emitted",
            a.frames, cfg.pipeline.window
        );
    }
    let spec = DatasetSpec {
        per_class: a.per_class,
        frames_per_recording: a.frames,
        seed: a.seed,
    };
    let (manifest, entries) = generate_dataset(&cfg.radar, &templates, spec, &a.out)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &entries {
        *counts.entry(e.label.map_or("unlabeled", ClassLabel::name)).or_default() += 1;
    }
    let mut files: Vec<PathBuf> = entries.iter().map(|e| e.resolve(&manifest)).collect();
    files.push(manifest.clone());
    println!("manifest: {}", manifest.display());
    for (label, n) in counts {
        println!("{label}: {n}");
    }
    println!("sha256: {}", io::hash_files(&files)?);
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut pcfg = cfg.pipeline.clone();
    if let Some(w) = a.window {
        pcfg.window = w;
    }
    let rec = io::read_recording(&a.input)?;
    let windows = process_stream(&rec, &cfg.radar, &pcfg)?;
    io::write_features(&a.out, &FeatureFile::from_windows(rec.label, &windows)?)?;
    println!("{} windows -> {}", windows.len(), a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    apply(&mut cfg, &a.run);
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if let Some(b) = a.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.train.ablation |= a.ablation;
    cfg.train.validate()?;
    let (train_set, _) = build_dataset(&a.manifest, &cfg.radar, &cfg.dataset_options())?;
    println!("training on {} windows {:?}", train_set.len(), train_set.class_counts());
    let (mut net, outcome) = fit(&train_set, &cfg.train)?;
    for (e, loss) in outcome.epoch_mean_loss.iter().enumerate() {
        println!("epoch {}: mean loss {loss:.6}", e + 1);
    }
    save_model(&a.out, &mut net)?;
    let hash = io::hash_files(&[&a.out])?;
    println!("model: {} sha256 {hash}", a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    apply(&mut cfg, &a.run);
    let mut net = load_model(&a.model)?;
    let (_, test_set) = build_dataset(&a.manifest, &cfg.radar, &cfg.dataset_options())?;
    let report = evaluate(&mut net, &test_set)?;
    for c in &report.per_class {
        let acc = c.accuracy.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        println!("{:<8} support {:>4} accuracy {acc}", c.label.name(), c.support);
    }
    println!("average accuracy {:.2}", report.average);
    let l = report.latency_ms;
    println!("latency ms p50 {:.2} p95 {:.2} p99 {:.2}", l.p50, l.p95, l.p99);
    if let Some(p) = &a.report {
        write_text(p, &report.to_json())?;
    }
    if let Some(p) = &a.pgm {
        std::fs::write(p, report.confusion_pgm(32)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    apply(&mut cfg, &a.run);
    cfg.train.ablation = false;
    cfg.train.validate()?;
    let report = ablation_e_respd(&a.manifest, &cfg.radar, &cfg.train, &cfg.dataset_options())?;
    for d in &report.per_class_delta {
        let with = report.with_e_respd.accuracy(d.label);
        let without = report.without_e_respd.accuracy(d.label);
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        println!("{:<8} {} vs {} (delta {})", d.label.name(), fmt(with), fmt(without), fmt(d.delta));
    }
    println!(
        "average {:.2} vs {:.2} (delta {:.2}) at window {}",
        report.with_e_respd.average, report.without_e_respd.average, report.average_delta, report.window
    );
    if let Some(p) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_text(p, &json)?;
    }
    Ok(())
}

fn stream(a: StreamArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let mut pcfg = cfg.pipeline.clone();
    if let Some(w) = a.window {
        pcfg.window = w;
    }
    let net = load_model(&a.model)?;
    let rec = io::read_recording(&a.input)?;
    rec.validate(&cfg.radar)?;
    let mut clf = Classifier::new(&cfg.radar, &pcfg, net)?;
    let period = Duration::from_secs_f64(cfg.radar.frame_period);
    let report = replay(&mut clf, &rec.frames, period, a.realtime, |p| {
        println!("frame {} {} {:.4}", p.frame_index, p.label, p.confidence);
    })?;
    let l = report.latency_ms;
    eprintln!(
        "frames {} latency ms p50 {:.2} p95 {:.2} p99 {:.2} max {:.2} deadline misses {}",
        report.frames, l.p50, l.p95, l.p99, l.max, report.deadline_misses
    );
    Ok(())
}
