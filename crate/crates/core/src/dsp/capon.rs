use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ComplexMatrix;
use crate::error::{Error, Result};
use crate::radar::{Axis, AxisUnit, ImageKind, RadarConfig, RadarImage};

/// Diagonal loading relative to the mean per-element power.
pub const DEFAULT_LOADING: f64 = 1e-3;

/// Uniform angle grid of `n_bins` equal-width bins spanning `[min_deg, max_deg]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub n_bins: usize,
    pub min_deg: f64,
    pub max_deg: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid {
            n_bins: 64,
            min_deg: -60.0,
            max_deg: 60.0,
        }
    }
}

impl AngleGrid {
    pub fn width(&self) -> f64 {
        (self.max_deg - self.min_deg) / self.n_bins as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.min_deg + (i as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.center(i)).collect()
    }

    /// Bin whose half-open interval contains `deg` (clamped to the grid).
    pub fn bin_of(&self, deg: f64) -> usize {
        let i = ((deg - self.min_deg) / self.width()).floor();
        i.clamp(0.0, (self.n_bins - 1) as f64) as usize
    }

    pub fn axis(&self) -> Axis {
        Axis {
            unit: AxisUnit::AngleDegrees,
            start: self.center(0),
            step: self.width(),
            len: self.n_bins,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_bins == 0 || !(self.max_deg > self.min_deg) || self.min_deg < -90.0 || self.max_deg > 90.0 {
            return Err(Error::Config(format!("invalid angle grid {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaponSpectrum {
    pub power: Vec<f64>,
    /// Set when the snapshots carried no energy; `power` is then flat.
    pub degenerate: bool,
}

impl CaponSpectrum {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.power.iter().enumerate() {
            if p > self.power[best] {
                best = i;
            }
        }
        best
    }
}

/// Two-element Capon (MVDR) spatial spectrum `1 / (a^H R^-1 a)`.
///
/// `R` is the sample covariance of the snapshots, loaded by
/// `loading * trace(R) / 2` on the diagonal. The steering vector is
/// `[1, exp(-j 2 pi (spacing / lambda) sin(theta))]`.
pub fn capon_spectrum(
    snapshots: &[[Complex64; 2]],
    grid: &AngleGrid,
    spacing_over_lambda: f64,
    loading: f64,
) -> Result<CaponSpectrum> {
    grid.validate()?;
    if snapshots.len() < 2 {
        return Err(Error::Config(format!("capon needs >= 2 snapshots, got {}", snapshots.len())));
    }
    if !(loading > 0.0) {
        return Err(Error::Config(format!("diagonal loading {loading} must be > 0")));
    }
    let k = snapshots.len() as f64;
    let (mut r00, mut r11, mut r01) = (0.0, 0.0, Complex64::new(0.0, 0.0));
    for x in snapshots {
        r00 += x[0].norm_sqr();
        r11 += x[1].norm_sqr();
        r01 += x[0] * x[1].conj();
    }
    r00 /= k;
    r11 /= k;
    r01 /= k;
    let trace = r00 + r11;
    if !trace.is_finite() {
        return Err(Error::Numeric("non-finite snapshot covariance".into()));
    }
    if trace == 0.0 {
        return Ok(CaponSpectrum {
            power: vec![1.0 / loading; grid.n_bins],
            degenerate: true,
        });
    }
    let load = loading * trace / 2.0;
    let (a, d) = (r00 + load, r11 + load);
    let det = a * d - r01.norm_sqr();
    if !(det > 0.0) {
        return Err(Error::Numeric(format!("loaded covariance not invertible (det = {det})")));
    }
    // a^H R^-1 a for a = [1, e^{-j psi}] and R^-1 = [[d, -r01], [-r01*, a]] / det.
    let power = grid
        .centers()
        .iter()
        .map(|&deg| {
            let psi = 2.0 * PI * spacing_over_lambda * deg.to_radians().sin();
            let e = Complex64::from_polar(1.0, -psi);
            let quad = (a + d - 2.0 * (r01 * e).re) / det;
            1.0 / quad
        })
        .collect();
    Ok(CaponSpectrum {
        power,
        degenerate: false,
    })
}

/// Range-azimuth and range-elevation images from the micro slow-time block.
///
/// Azimuth uses the pair (rx0, rx1), elevation (rx0, rx2); the snapshots of
/// a range bin are its slow-time samples. Degenerate bins are left at zero.
pub fn rai_rei(
    block: &[ComplexMatrix],
    cfg: &RadarConfig,
    grid: &AngleGrid,
    loading: f64,
) -> Result<(RadarImage, RadarImage)> {
    if block.len() < 3 {
        return Err(Error::shape("rai_rei", "3 rx channels", block.len()));
    }
    let (chirps, bins) = (block[0].rows, block[0].cols);
    for b in &block[..3] {
        if (b.rows, b.cols) != (chirps, bins) {
            return Err(Error::shape("rai_rei", (chirps, bins), (b.rows, b.cols)));
        }
    }
    let ratio = cfg.antenna_spacing / cfg.wavelength();
    let image = |kind, other: &ComplexMatrix| -> Result<RadarImage> {
        let mut data = vec![0.0f32; bins * grid.n_bins];
        let mut snaps = Vec::with_capacity(chirps);
        for r in 0..bins {
            snaps.clear();
            snaps.extend((0..chirps).map(|c| [block[0].at(c, r), other.at(c, r)]));
            let spec = capon_spectrum(&snaps, grid, ratio, loading)?;
            if !spec.degenerate {
                for (d, p) in data[r * grid.n_bins..(r + 1) * grid.n_bins].iter_mut().zip(&spec.power) {
                    *d = *p as f32;
                }
            }
        }
        RadarImage::new(kind, Axis::range(cfg), grid.axis(), data)
    };
    Ok((image(ImageKind::Rai, &block[1])?, image(ImageKind::Rei, &block[2])?))
}
