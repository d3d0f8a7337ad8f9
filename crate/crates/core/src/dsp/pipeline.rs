use serde::{Deserialize, Serialize};

use super::{
    doppler_fft, micro_rdi, rai_rei, range_fft, AngleGrid, ERespd, FftEngine, MicroBuffer, MtiState,
    SincFilter, WindowKind, DEFAULT_LOADING, MICRO_STACK,
};
use crate::error::{Error, Result};
use crate::radar::{AdcCube, RadarConfig, RadarImage};
use crate::sim::Recording;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// E-RESPD window in frames.
    pub window: usize,
    pub mti_alpha: f64,
    pub sinc: SincFilter,
    pub angle_grid: AngleGrid,
    pub diagonal_loading: f64,
    pub range_window: WindowKind,
    pub doppler_window: WindowKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: 200,
            mti_alpha: 0.6,
            sinc: SincFilter::default(),
            angle_grid: AngleGrid::default(),
            diagonal_loading: DEFAULT_LOADING,
            range_window: WindowKind::Hann,
            doppler_window: WindowKind::Hann,
        }
    }
}

impl PipelineConfig {
    pub fn with_window(window: usize) -> Self {
        PipelineConfig {
            window,
            ..Self::default()
        }
    }

    /// Frames consumed before the first [`FeatureWindow`] is emitted: one
    /// frame seeds the clutter background, eight fill the micro stack, and
    /// the averaging window then needs `window - 1` more.
    pub fn latency_frames(&self) -> usize {
        self.window + MICRO_STACK
    }
}

/// The four averaged, normalized images of one classification step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub rdi: RadarImage,
    pub micro_rdi: RadarImage,
    pub rai: RadarImage,
    pub rei: RadarImage,
    pub window_len: usize,
    /// Index of the frame that completed this window.
    pub frame_index: u64,
}

impl FeatureWindow {
    /// Images in network input order: RDI, micro-RDI, RAI, REI.
    pub fn images(&self) -> [&RadarImage; 4] {
        [&self.rdi, &self.micro_rdi, &self.rai, &self.rei]
    }
}

/// Stateful per-stream image former.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: RadarConfig,
    pcfg: PipelineConfig,
    engine: FftEngine,
    kernel: Vec<f64>,
    mti: MtiState,
    micro: MicroBuffer,
    respd: [ERespd; 4],
    frames_seen: u64,
}

impl Pipeline {
    pub fn new(cfg: &RadarConfig, pcfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        if !(pcfg.diagonal_loading > 0.0) {
            return Err(Error::Config("diagonal_loading must be > 0".into()));
        }
        let respd = ERespd::new(pcfg.window)?;
        Ok(Pipeline {
            cfg: cfg.clone(),
            pcfg: pcfg.clone(),
            engine: FftEngine::for_config(cfg),
            kernel: pcfg.sinc.kernel()?,
            mti: MtiState::new(pcfg.mti_alpha)?,
            micro: MicroBuffer::new(),
            respd: [respd.clone(), respd.clone(), respd.clone(), respd],
            frames_seen: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.pcfg
    }

    pub fn radar(&self) -> &RadarConfig {
        &self.cfg
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn reset(&mut self) {
        *self = Pipeline::new(&self.cfg, &self.pcfg).expect("config validated at construction");
    }

    /// Feeds one frame; returns a window once every modality is ready.
    pub fn push_frame(&mut self, cube: &AdcCube) -> Result<Option<FeatureWindow>> {
        cube.check_dims(&self.cfg)?;
        let raw = range_fft(cube, &self.engine, self.pcfg.range_window);
        let mut filtered = raw.clone();
        self.mti.apply(&mut filtered)?;
        self.frames_seen += 1;
        if self.frames_seen == 1 {
            // The first frame only seeds the clutter background.
            return Ok(None);
        }

        let rdi = doppler_fft(&filtered, &self.cfg, &self.engine, self.pcfg.doppler_window)?;
        let rdi = self.respd[0].push(rdi)?;

        self.micro.push(raw);
        let Some(micro) = micro_rdi(&self.micro, &self.kernel, &self.cfg, &self.engine)? else {
            return Ok(None);
        };
        let (rai, rei) = rai_rei(&micro.block, &self.cfg, &self.pcfg.angle_grid, self.pcfg.diagonal_loading)?;
        let micro_img = self.respd[1].push(micro.image)?;
        let rai = self.respd[2].push(rai)?;
        let rei = self.respd[3].push(rei)?;

        match (rdi, micro_img, rai, rei) {
            (Some(rdi), Some(micro_rdi), Some(rai), Some(rei)) => Ok(Some(FeatureWindow {
                rdi,
                micro_rdi,
                rai,
                rei,
                window_len: self.pcfg.window,
                frame_index: cube.frame_index,
            })),
            _ => Ok(None),
        }
    }
}

/// Runs a whole recording through a fresh pipeline.
pub fn process_stream(recording: &Recording, cfg: &RadarConfig, pcfg: &PipelineConfig) -> Result<Vec<FeatureWindow>> {
    recording.validate(cfg)?;
    let mut pipeline = Pipeline::new(cfg, pcfg)?;
    let mut out = Vec::with_capacity(recording.frames.len().saturating_sub(pcfg.latency_frames() - 1));
    for frame in &recording.frames {
        if let Some(w) = pipeline.push_frame(frame)? {
            out.push(w);
        }
    }
    Ok(out)
}
