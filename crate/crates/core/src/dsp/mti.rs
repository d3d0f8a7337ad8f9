use num_complex::Complex64;

use super::ComplexMatrix;
use crate::error::{Error, Result};

/// Exponential background canceller over range profiles.
///
/// Each frame the per-rx background is blended towards the frame's
/// chirp-mean profile, then subtracted from every chirp. The first frame
/// seeds the background with its own chirp mean.
#[derive(Debug, Clone)]
pub struct MtiState {
    alpha: f64,
    background: Option<Vec<Vec<Complex64>>>,
}

impl MtiState {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("MTI alpha {alpha} outside (0, 1]")));
        }
        Ok(MtiState {
            alpha,
            background: None,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn background(&self) -> Option<&[Vec<Complex64>]> {
        self.background.as_deref()
    }

    pub fn reset(&mut self) {
        self.background = None;
    }

    /// Filters `profiles` in place (one `[n_chirps][n_range_bins]` matrix per rx).
    pub fn apply(&mut self, profiles: &mut [ComplexMatrix]) -> Result<()> {
        let means: Vec<Vec<Complex64>> = profiles.iter().map(chirp_mean).collect();
        match &mut self.background {
            Some(bg) => {
                if bg.len() != means.len() || bg.iter().zip(&means).any(|(b, m)| b.len() != m.len()) {
                    return Err(Error::shape(
                        "mti",
                        (bg.len(), bg.first().map_or(0, Vec::len)),
                        (means.len(), means.first().map_or(0, Vec::len)),
                    ));
                }
                for (b, m) in bg.iter_mut().zip(&means) {
                    for (bv, mv) in b.iter_mut().zip(m) {
                        *bv = *bv * (1.0 - self.alpha) + *mv * self.alpha;
                    }
                }
            }
            None => self.background = Some(means),
        }
        let bg = self.background.as_ref().expect("seeded above");
        for (p, b) in profiles.iter_mut().zip(bg) {
            for row in p.data.chunks_exact_mut(p.cols) {
                for (v, bv) in row.iter_mut().zip(b) {
                    *v -= *bv;
                }
            }
        }
        Ok(())
    }
}

fn chirp_mean(p: &ComplexMatrix) -> Vec<Complex64> {
    let mut mean = vec![Complex64::new(0.0, 0.0); p.cols];
    for row in p.data.chunks_exact(p.cols) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += *v;
        }
    }
    let scale = 1.0 / p.rows.max(1) as f64;
    mean.iter_mut().for_each(|m| *m *= scale);
    mean
}
