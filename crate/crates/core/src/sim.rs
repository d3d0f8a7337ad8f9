//! Point-scatterer FMCW scene simulator.
//!
//! Each scatterer is a point reflector with a slow radial vibration standing
//! in for facial muscle motion. The receive array is L-shaped: rx0 sits at
//! the corner, rx1 is displaced along the azimuth axis and rx2 along the
//! elevation axis, each by `antenna_spacing`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, ManifestEntry};
use crate::label::ClassLabel;
use crate::radar::{derive_params, AdcCube, RadarConfig, SPEED_OF_LIGHT};

const DEFAULT_TEMPLATES_JSON: &str = include_str!("../config/scene_templates.json");

pub const MAX_ANGLE_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    /// Mean distance from the array, meters.
    pub base_range: f64,
    /// Degrees; positive towards rx1.
    pub azimuth: f64,
    /// Degrees; positive towards rx2.
    pub elevation: f64,
    pub amplitude: f64,
    /// Peak radial displacement, meters.
    pub vibration_amp: f64,
    pub vibration_freq: f64,
    pub vibration_phase: f64,
    pub drift_velocity: f64,
}

impl Scatterer {
    pub fn fixed(base_range: f64, azimuth: f64, elevation: f64) -> Self {
        Scatterer {
            base_range,
            azimuth,
            elevation,
            amplitude: 1.0,
            vibration_amp: 0.0,
            vibration_freq: 0.0,
            vibration_phase: 0.0,
            drift_velocity: 0.0,
        }
    }

    pub fn validate(&self, max_range: f64) -> Result<()> {
        let ok = self.base_range > 0.0
            && self.base_range < max_range
            && self.azimuth.abs() <= MAX_ANGLE_DEG
            && self.elevation.abs() <= MAX_ANGLE_DEG
            && self.vibration_amp >= 0.0
            && self.vibration_freq >= 0.0
            && [self.amplitude, self.vibration_phase, self.drift_velocity]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid scatterer {self:?}")))
        }
    }

    /// Radial distance at time `t` seconds.
    #[inline]
    pub fn range_at(&self, t: f64) -> f64 {
        self.base_range
            + self.vibration_amp * (2.0 * PI * self.vibration_freq * t + self.vibration_phase).sin()
            + self.drift_velocity * t
    }

    /// Direction sines (along the azimuth leg, along the elevation leg).
    pub fn direction_sines(&self) -> (f64, f64) {
        let (az, el) = (self.azimuth.to_radians(), self.elevation.to_radians());
        (el.cos() * az.sin(), el.sin())
    }
}

/// Offsets (azimuth leg, elevation leg) of each receive element, meters.
pub fn element_offsets(cfg: &RadarConfig) -> Vec<(f64, f64)> {
    let d = cfg.antenna_spacing;
    (0..cfg.n_rx)
        .map(|r| match r {
            0 => (0.0, 0.0),
            1 => (d, 0.0),
            2 => (0.0, d),
            // Extra elements continue the azimuth leg.
            n => ((n - 1) as f64 * d, 0.0),
        })
        .collect()
}

/// Synthesizes one frame starting at time `t0`.
///
/// Each sample is `sum_k A_k cos(2 pi f_b n / f_s + phi_k) + N(0, noise)` where the
/// beat frequency follows the instantaneous range of the scatterer at the
/// start of the chirp, and `phi_k` carries the two-way carrier phase minus the
/// element's path-length advance towards the scatterer.
pub fn synth_frame<R: Rng + ?Sized>(
    cfg: &RadarConfig,
    scatterers: &[Scatterer],
    t0: f64,
    noise: f64,
    frame_index: u64,
    rng: &mut R,
) -> Result<AdcCube> {
    let params = derive_params(cfg)?;
    for s in scatterers {
        s.validate(params.max_range)?;
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::Domain(format!("noise amplitude {noise} must be >= 0")));
    }
    let lambda = params.wavelength;
    let t_active = cfg.chirp_active_time();
    let offsets = element_offsets(cfg);
    let mut acc = vec![0.0f64; cfg.samples_per_frame()];

    for s in scatterers {
        let (ux, uy) = s.direction_sines();
        for c in 0..cfg.n_chirps {
            let t = t0 + c as f64 * cfg.chirp_to_chirp;
            let range = s.range_at(t);
            let beat = 2.0 * cfg.bandwidth * range / (SPEED_OF_LIGHT * t_active);
            let step = Complex64::from_polar(1.0, 2.0 * PI * beat / cfg.adc_rate);
            for (r, &(dx, dy)) in offsets.iter().enumerate() {
                let phase = 4.0 * PI * range / lambda - 2.0 * PI * (dx * ux + dy * uy) / lambda;
                let mut z = Complex64::from_polar(s.amplitude, phase);
                let base = (r * cfg.n_chirps + c) * cfg.n_samples;
                for v in &mut acc[base..base + cfg.n_samples] {
                    *v += z.re;
                    z *= step;
                }
            }
        }
    }

    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("noise sigma checked above");
        for v in &mut acc {
            *v += normal.sample(rng);
        }
    }
    AdcCube::new(
        cfg.n_rx,
        cfg.n_chirps,
        cfg.n_samples,
        frame_index,
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

/// Inclusive parameter interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.1 > self.0 {
            rng.random_range(self.0..=self.1)
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererTemplate {
    pub base_range: Interval,
    pub azimuth: Interval,
    pub elevation: Interval,
    pub amplitude: Interval,
    pub vibration_amp: Interval,
    pub vibration_freq: Interval,
    pub drift_velocity: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneClass {
    pub label: ClassLabel,
    pub noise_floor: f64,
    pub scatterers: Vec<ScattererTemplate>,
}

/// Per-class scene templates plus the multiplicative per-draw jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneTemplates {
    pub jitter: f64,
    pub classes: Vec<SceneClass>,
}

impl Default for SceneTemplates {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_TEMPLATES_JSON).expect("bundled scene templates are valid")
    }
}

impl SceneTemplates {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let t: SceneTemplates =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("scene templates: {e}")))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config(format!("jitter {} outside [0, 1)", self.jitter)));
        }
        for label in ClassLabel::ALL {
            let class = self.class(label)?;
            let n = class.scatterers.len();
            let ok = match label {
                ClassLabel::NoFace => n == 0,
                _ => n >= 2,
            };
            if !ok {
                return Err(Error::Config(format!("class {label} has {n} scatterers")));
            }
            if !(class.noise_floor.is_finite() && class.noise_floor >= 0.0) {
                return Err(Error::Config(format!("class {label} noise_floor {}", class.noise_floor)));
            }
        }
        Ok(())
    }

    pub fn class(&self, label: ClassLabel) -> Result<&SceneClass> {
        self.classes
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Config(format!("no template for class {label}")))
    }
}

/// Draws a scene for `label`; every drawn parameter is scaled by a factor in
/// `[1 - jitter, 1 + jitter]`.
pub fn scene_for_class<R: Rng + ?Sized>(
    templates: &SceneTemplates,
    label: ClassLabel,
    rng: &mut R,
) -> Result<Vec<Scatterer>> {
    let class = templates.class(label)?;
    let j = templates.jitter;
    let jittered = |iv: &Interval, rng: &mut R| {
        let v = iv.draw(rng);
        let scale = if j > 0.0 { rng.random_range(1.0 - j..=1.0 + j) } else { 1.0 };
        v * scale
    };
    Ok(class
        .scatterers
        .iter()
        .map(|t| Scatterer {
            base_range: jittered(&t.base_range, rng),
            azimuth: jittered(&t.azimuth, rng).clamp(-MAX_ANGLE_DEG, MAX_ANGLE_DEG),
            elevation: jittered(&t.elevation, rng).clamp(-MAX_ANGLE_DEG, MAX_ANGLE_DEG),
            amplitude: jittered(&t.amplitude, rng),
            vibration_amp: jittered(&t.vibration_amp, rng).max(0.0),
            vibration_freq: jittered(&t.vibration_freq, rng).max(0.0),
            vibration_phase: rng.random_range(0.0..2.0 * PI),
            drift_velocity: jittered(&t.drift_velocity, rng),
        })
        .collect())
}

/// SplitMix64 finalizer; derives independent per-recording seeds.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub label: Option<ClassLabel>,
    pub seed: u64,
    pub frames: Vec<AdcCube>,
}

impl Recording {
    pub fn validate(&self, cfg: &RadarConfig) -> Result<()> {
        for f in &self.frames {
            f.check_dims(cfg)?;
        }
        Ok(())
    }
}

/// Simulates a whole recording from its seed: the scene is drawn first, then
/// frames follow at the configured frame period, all from one rng stream.
pub fn simulate_recording(
    cfg: &RadarConfig,
    templates: &SceneTemplates,
    label: ClassLabel,
    n_frames: usize,
    seed: u64,
) -> Result<Recording> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = scene_for_class(templates, label, &mut rng)?;
    let noise = templates.class(label)?.noise_floor;
    simulate_scene(cfg, &scene, Some(label), noise, n_frames, seed, &mut rng)
}

pub fn simulate_scene<R: Rng + ?Sized>(
    cfg: &RadarConfig,
    scene: &[Scatterer],
    label: Option<ClassLabel>,
    noise: f64,
    n_frames: usize,
    seed: u64,
    rng: &mut R,
) -> Result<Recording> {
    let frames = (0..n_frames)
        .map(|k| synth_frame(cfg, scene, k as f64 * cfg.frame_period, noise, k as u64, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(Recording { label, seed, frames })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSpec {
    pub per_class: usize,
    pub frames_per_recording: usize,
    pub seed: u64,
}

/// Writes `per_class` recordings for every label into `out_dir` plus a
/// `manifest.jsonl` listing them. Returns the manifest path and entries.
pub fn generate_dataset(
    cfg: &RadarConfig,
    templates: &SceneTemplates,
    spec: DatasetSpec,
    out_dir: &Path,
) -> Result<(PathBuf, Vec<ManifestEntry>)> {
    cfg.validate()?;
    if spec.per_class == 0 || spec.frames_per_recording == 0 {
        return Err(Error::Config("per_class and frames_per_recording must be >= 1".into()));
    }
    if spec.frames_per_recording > u32::MAX as usize {
        return Err(Error::Config("frames_per_recording exceeds u32".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let jobs: Vec<(ClassLabel, usize)> = ClassLabel::ALL
        .into_iter()
        .flat_map(|l| (0..spec.per_class).map(move |i| (l, i)))
        .collect();

    let entries = jobs
        .par_iter()
        .map(|&(label, i)| {
            let seed = split_seed(spec.seed, ((label.code() as u64) << 32) | i as u64);
            let rec = simulate_recording(cfg, templates, label, spec.frames_per_recording, seed)?;
            let name = format!("{}_{:04}.ferd", label.name(), i);
            io::write_recording(&out_dir.join(&name), &rec)?;
            Ok(ManifestEntry {
                path: name,
                label: Some(label),
                seed,
                n_frames: spec.frames_per_recording as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest_path = out_dir.join("manifest.jsonl");
    io::write_manifest(&manifest_path, &entries)?;
    Ok((manifest_path, entries))
}
