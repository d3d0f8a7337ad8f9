//! Radar configuration, derived FMCW quantities and the image/cube types
//! shared by the simulator, the signal pipeline and the network.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const DEFAULT_CONFIG_JSON: &str = include_str!("../config/radar_default.json");

/// Chirp and array parameters of a single-Tx FMCW sensor (SI units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_chirps: usize,
    pub n_samples: usize,
    pub frame_period: f64,
    pub chirp_to_chirp: f64,
    pub bandwidth: f64,
    pub carrier_freq: f64,
    pub adc_rate: f64,
    pub antenna_spacing: f64,
}

impl Default for RadarConfig {
    /// BGT60TR13C setup: 1 Tx, 3 Rx, 64 chirps of 128 samples, 50 ms frames,
    /// 391.55 us chirp repetition, 1 GHz sweep at 60 GHz.
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG_JSON).expect("bundled radar config is valid")
    }
}

impl RadarConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RadarConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("radar config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RadarConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx != 1 {
            return Err(Error::Config(format!("n_tx must be 1, got {}", self.n_tx)));
        }
        // RAI and REI each need one leg of the L-shaped array.
        if self.n_rx < 3 {
            return Err(Error::Config(format!("n_rx must be >= 3, got {}", self.n_rx)));
        }
        for (name, n) in [("n_chirps", self.n_chirps), ("n_samples", self.n_samples)] {
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Config(format!("{name} must be a power of two >= 2, got {n}")));
            }
            if n > u16::MAX as usize {
                return Err(Error::Config(format!("{name} exceeds {}", u16::MAX)));
            }
        }
        for (name, v) in [
            ("frame_period", self.frame_period),
            ("chirp_to_chirp", self.chirp_to_chirp),
            ("bandwidth", self.bandwidth),
            ("carrier_freq", self.carrier_freq),
            ("adc_rate", self.adc_rate),
            ("antenna_spacing", self.antenna_spacing),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        let burst = self.n_chirps as f64 * self.chirp_to_chirp;
        if self.frame_period < burst {
            return Err(Error::Config(format!(
                "frame_period {} s shorter than chirp burst {} s",
                self.frame_period, burst
            )));
        }
        if self.chirp_active_time() > self.chirp_to_chirp {
            return Err(Error::Config(format!(
                "active chirp time {} s exceeds chirp_to_chirp {} s",
                self.chirp_active_time(),
                self.chirp_to_chirp
            )));
        }
        Ok(())
    }

    /// Sampled duration of one chirp, `n_samples / adc_rate`.
    pub fn chirp_active_time(&self) -> f64 {
        self.n_samples as f64 / self.adc_rate
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    pub fn n_range_bins(&self) -> usize {
        self.n_samples / 2
    }

    pub fn samples_per_frame(&self) -> usize {
        self.n_rx * self.n_chirps * self.n_samples
    }
}

/// Quantities that follow from a [`RadarConfig`] through the standard FMCW relations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub range_resolution: f64,
    pub max_range: f64,
    pub wavelength: f64,
    pub velocity_resolution: f64,
    pub max_velocity: f64,
    pub n_range_bins: usize,
    pub n_doppler_bins: usize,
}

impl DerivedParams {
    fn compute(cfg: &RadarConfig) -> Self {
        let range_resolution = SPEED_OF_LIGHT / (2.0 * cfg.bandwidth);
        let wavelength = cfg.wavelength();
        let n_range_bins = cfg.n_range_bins();
        DerivedParams {
            range_resolution,
            max_range: n_range_bins as f64 * range_resolution,
            wavelength,
            velocity_resolution: wavelength / (2.0 * cfg.n_chirps as f64 * cfg.chirp_to_chirp),
            max_velocity: wavelength / (4.0 * cfg.chirp_to_chirp),
            n_range_bins,
            n_doppler_bins: cfg.n_chirps,
        }
    }

    /// Checks that a stored set of parameters still agrees with `cfg`.
    pub fn verify(&self, cfg: &RadarConfig) -> Result<()> {
        let fresh = DerivedParams::compute(cfg);
        if fresh != *self {
            return Err(Error::Config(format!(
                "derived parameters {self:?} do not match config (expected {fresh:?})"
            )));
        }
        Ok(())
    }
}

pub fn derive_params(cfg: &RadarConfig) -> Result<DerivedParams> {
    cfg.validate()?;
    Ok(DerivedParams::compute(cfg))
}

/// Fractional range bin of a distance; callers round as needed.
pub fn range_bin_of(cfg: &RadarConfig, range: f64) -> Result<f64> {
    let p = derive_params(cfg)?;
    if !(range.is_finite() && (0.0..=p.max_range).contains(&range)) {
        return Err(Error::Domain(format!(
            "range {range} m outside [0, {}] m",
            p.max_range
        )));
    }
    Ok(range / p.range_resolution)
}

/// One frame of real ADC samples, laid out `[rx][chirp][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcCube {
    pub n_rx: usize,
    pub n_chirps: usize,
    pub n_samples: usize,
    pub frame_index: u64,
    pub data: Vec<f32>,
}

impl AdcCube {
    pub fn zeros(cfg: &RadarConfig, frame_index: u64) -> Self {
        AdcCube {
            n_rx: cfg.n_rx,
            n_chirps: cfg.n_chirps,
            n_samples: cfg.n_samples,
            frame_index,
            data: vec![0.0; cfg.samples_per_frame()],
        }
    }

    pub fn new(
        n_rx: usize,
        n_chirps: usize,
        n_samples: usize,
        frame_index: u64,
        data: Vec<f32>,
    ) -> Result<Self> {
        let expected = n_rx * n_chirps * n_samples;
        if data.len() != expected {
            return Err(Error::shape("AdcCube::new", expected, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite ADC sample at index {i}")));
        }
        Ok(AdcCube {
            n_rx,
            n_chirps,
            n_samples,
            frame_index,
            data,
        })
    }

    pub fn check_dims(&self, cfg: &RadarConfig) -> Result<()> {
        let have = (self.n_rx, self.n_chirps, self.n_samples);
        let want = (cfg.n_rx, cfg.n_chirps, cfg.n_samples);
        if have != want || self.data.len() != cfg.samples_per_frame() {
            return Err(Error::shape("AdcCube", want, have));
        }
        Ok(())
    }

    #[inline]
    pub fn chirp(&self, rx: usize, chirp: usize) -> &[f32] {
        let start = (rx * self.n_chirps + chirp) * self.n_samples;
        &self.data[start..start + self.n_samples]
    }

    #[inline]
    pub fn chirp_mut(&mut self, rx: usize, chirp: usize) -> &mut [f32] {
        let start = (rx * self.n_chirps + chirp) * self.n_samples;
        &mut self.data[start..start + self.n_samples]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImageKind {
    Rdi,
    MicroRdi,
    Rai,
    Rei,
}

impl ImageKind {
    pub const ALL: [ImageKind; 4] = [ImageKind::Rdi, ImageKind::MicroRdi, ImageKind::Rai, ImageKind::Rei];

    pub fn name(self) -> &'static str {
        match self {
            ImageKind::Rdi => "rdi",
            ImageKind::MicroRdi => "micro_rdi",
            ImageKind::Rai => "rai",
            ImageKind::Rei => "rei",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisUnit {
    RangeMeters,
    VelocityMetersPerSecond,
    AngleDegrees,
}

/// Uniform axis: bin `i` is centred at `start + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub unit: AxisUnit,
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn center(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn range(cfg: &RadarConfig) -> Self {
        Axis {
            unit: AxisUnit::RangeMeters,
            start: 0.0,
            step: SPEED_OF_LIGHT / (2.0 * cfg.bandwidth),
            len: cfg.n_range_bins(),
        }
    }

    /// Doppler axis after the zero-velocity bin is shifted to `n_chirps / 2`.
    pub fn doppler(cfg: &RadarConfig) -> Self {
        let step = cfg.wavelength() / (2.0 * cfg.n_chirps as f64 * cfg.chirp_to_chirp);
        Axis {
            unit: AxisUnit::VelocityMetersPerSecond,
            start: -(cfg.n_chirps as f64 / 2.0) * step,
            step,
            len: cfg.n_chirps,
        }
    }
}

/// Non-negative 2-D magnitude map stored row-major as `[rows][cols]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarImage {
    pub kind: ImageKind,
    pub rows: usize,
    pub cols: usize,
    pub row_axis: Axis,
    pub col_axis: Axis,
    pub data: Vec<f32>,
}

impl RadarImage {
    pub fn new(kind: ImageKind, row_axis: Axis, col_axis: Axis, data: Vec<f32>) -> Result<Self> {
        let (rows, cols) = (row_axis.len, col_axis.len);
        if data.len() != rows * cols {
            return Err(Error::shape("RadarImage::new", rows * cols, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Numeric(format!(
                "image value {} at index {i} is not a finite magnitude",
                data[i]
            )));
        }
        Ok(RadarImage {
            kind,
            rows,
            cols,
            row_axis,
            col_axis,
            data,
        })
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// (row, col) of the largest value; the first occurrence wins on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        (best / self.cols, best % self.cols)
    }

    pub fn row_energy(&self, row: usize) -> f64 {
        self.row(row).iter().map(|&v| (v as f64) * (v as f64)).sum()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}
